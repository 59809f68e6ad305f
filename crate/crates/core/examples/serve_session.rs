//! Serves the workcell scenario on a local port, drives it from a client
//! that moves the operator, points at a spot and asks for a placement, then
//! replays the recorded session offline and checks the logs match.
//!
//!     cargo run --release --example serve_session

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::thread;

use coact::engine::events::to_ndjson;
use coact::engine::Engine;
use coact::interface::{load_scenario, read_record, replay, serve, write_record, ServeConfig};
use serde_json::Value;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/scenarios/workcell.json");
    let scenario = load_scenario(&path).unwrap().scenario;
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let engine = Engine::new(scenario.clone()).unwrap();
    let server = thread::spawn(move || serve(listener, engine, &ServeConfig { speed: 10.0, max_ticks: Some(3000) }).unwrap());

    let stream = TcpStream::connect(addr).unwrap();
    let mut tx = stream.try_clone().unwrap();
    let mut lines = BufReader::new(stream).lines();
    let mut send = |msg: &str| writeln!(tx, "{msg}").unwrap();
    let mut sent_request = false;
    let mut placed = false;
    while let Some(Ok(line)) = lines.next() {
        let v: Value = serde_json::from_str(&line).unwrap();
        match v["type"].as_str() {
            Some("state") => {
                let t = v["t"].as_f64().unwrap_or(0.0);
                if !sent_request && t >= 0.5 {
                    send(r#"{"type":"human_pose","p":[1.4,0.6,0.0],"v":[0.0,0.0,0.0]}"#);
                    send(r#"{"type":"command","channel":"voice","token":0}"#);
                    send(r#"{"type":"command","channel":"gesture","token":12,"payload":[0.5,0.4,0.1]}"#);
                    sent_request = true;
                }
            }
            Some("control") if v["event"] == "task_done" => {
                println!("{line}");
                placed = true;
                send(r#"{"type":"control","action":"stop"}"#);
            }
            Some("control") if v["event"] == "episode_end" => {
                println!("{line}");
                break;
            }
            _ => println!("{line}"),
        }
    }
    let outcome = server.join().unwrap();
    println!("placement finished: {placed}; {} client messages recorded", outcome.record.len());

    let mut buf = Vec::new();
    write_record(&mut buf, &outcome.record).unwrap();
    let record = read_record(buf.as_slice()).unwrap();
    let replayed = replay(Engine::new(scenario).unwrap(), &record, None).unwrap();
    let same = to_ndjson(replayed.events()) == to_ndjson(outcome.engine.events());
    println!("offline replay reproduces the live event log: {same}");
}
