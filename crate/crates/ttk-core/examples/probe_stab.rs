use std::time::Instant;
use ttk_core::engine::{prove_sequent, Bounds, ProofOutcome};
use ttk_core::stability::{alpha_s, stability_obligations};

fn main() {
    let depth: usize = std::env::var("PROBE_DEPTH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(6);
    let steps: usize = std::env::var("PROBE_STEPS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(50_000);
    let t0 = Instant::now();
    let p = alpha_s(2).unwrap();
    let obs = stability_obligations(&p).unwrap();
    println!("{} obligations, setup {:?}", obs.len(), t0.elapsed());
    let cut: u32 = std::env::var("PROBE_CUT")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let bounds = Bounds {
        term_depth: depth,
        steps,
        level_cutoff: cut,
    };
    let only = std::env::var("PROBE_ONLY").ok();
    for ob in &obs {
        if let Some(f) = &only {
            if !format!("{} {:?}", ob.axiom, ob.valuation).contains(f.as_str()) {
                continue;
            }
        }
        let t = Instant::now();
        let out = prove_sequent(&p.theory, &ob.sequent, &bounds);
        let tag = match out {
            ProofOutcome::Proven(_) => "proven",
            ProofOutcome::Unknown(_) => "UNKNOWN",
            ProofOutcome::Refuted(_) => "REFUTED",
        };
        println!("{:>8} {:>8.2?} {} {:?}", tag, t.elapsed(), ob.axiom, ob.valuation);
    }
    println!("total {:?}", t0.elapsed());
}
