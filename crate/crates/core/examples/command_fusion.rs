//! Voice and gesture tokens merged by the recognition window, then
//! classified by phrase lookup and, optionally, a freshly trained network.
//!
//!     cargo run --release --example command_fusion

use coact::fusion::vocab::TOKEN_NAMES;
use coact::fusion::{synthetic_dataset, train, Channel, ChannelEvent, Classifier, Fuser, FusionOutput, TrainingConfig};
use coact::geometry::Vec3;

fn main() {
    // "place" + pointing, a lone "pause", then "pick" + "component 2".
    let script = [
        (Channel::Voice, 0, 0.0, None),
        (Channel::Gesture, 12, 0.6, Some(Vec3::new(0.5, 0.4, 0.1))),
        (Channel::Voice, 6, 3.0, None),
        (Channel::Voice, 2, 6.0, None),
        (Channel::Voice, 4, 6.4, None),
    ];
    let samples: Vec<_> = synthetic_dataset(2000, 1).iter().map(|d| d.sample()).collect();
    let (net, history) = train(&samples, &TrainingConfig { max_epochs: 300, ..TrainingConfig::default() }).unwrap();
    println!("network trained for {} epochs", history.epochs_run());
    let classifiers = [("lookup", Classifier::Lookup), ("network", Classifier::Network(net))];

    let mut fuser = Fuser::new(2.0);
    let mut closed = Vec::new();
    for (channel, token, t, payload) in script {
        println!("t={t:.1} {channel:?} '{}'", TOKEN_NAMES[token]);
        for out in fuser.ingest(ChannelEvent::new(channel, token, t, payload).unwrap(), t) {
            if let FusionOutput::Closed(w) = out {
                closed.push(w);
            }
        }
    }
    closed.extend(fuser.poll(100.0));

    for w in &closed {
        let words: Vec<_> = w.tokens.iter().map(|&t| TOKEN_NAMES[t]).collect();
        print!("window at {:.1} {words:?} tensor {:?}", w.open_time, w.tensor.values);
        for (name, c) in &classifiers {
            print!("  {name}: {}", c.classify(w).map_or("none", |c| c.name()));
        }
        println!("{}", w.payload.map_or(String::new(), |p| format!("  at ({:.1}, {:.1}, {:.1})", p.x, p.y, p.z)));
    }
}
