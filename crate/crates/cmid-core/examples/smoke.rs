// temp experiment
use cmid_core::run::{run_train, RunConfig};

fn main() {
    let mut cfg = RunConfig::default();
    let args: Vec<String> = std::env::args().skip(1).collect();
    for kv in &args {
        let (k, v) = kv.split_once('=').expect("key=value");
        cfg.set(k, v).unwrap();
    }
    let t0 = std::time::Instant::now();
    let summary = run_train(&cfg).unwrap();
    println!("elapsed: {:.1}s", t0.elapsed().as_secs_f64());
    for s in &summary.seeds {
        println!("seed {}: final={:.2} zero_shot={:?}", s.seed, s.final_eval_return, s.zero_shot.as_ref().map(|z| z.mean_return));
    }
    println!("final mean {:.2} +- {:.2}", summary.final_mean, summary.final_stderr);
}
