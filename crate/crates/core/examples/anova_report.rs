//! One-way ANOVA over the bundled group files.
//!
//!     cargo run --example anova_report

use std::path::Path;

use coact::interface::load_groups;
use coact::stats::{f_inverse_cdf, one_way_anova};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/anova");
    for name in ["execution_times", "downtime", "questionnaire"] {
        let file = load_groups(&dir.join(format!("{name}.json"))).unwrap();
        let summaries: Vec<_> = file.groups.iter().map(|g| g.summary()).collect();
        let r = one_way_anova(&summaries).unwrap();
        let names: Vec<String> = file.groups.iter().map(|g| g.name.clone()).collect();
        println!("== {}", file.title.as_deref().unwrap_or(name));
        print!("{}", r.table(&names));
        let crit = f_inverse_cdf(0.95, r.df_between as f64, r.df_within as f64).unwrap();
        println!("F crit (5%) {crit:.4}: {}\n", if r.f > crit { "significant" } else { "not significant" });
    }
}
