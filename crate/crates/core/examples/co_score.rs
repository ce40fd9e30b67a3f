//! Score patterns against ranked literature evidence and measure agreement
//! between the literature verdicts and a simulated expert panel.
//!
//!     cargo run -p gazelens --example co_score

use gazelens::co_eval::{
    cohen_kappa, score_all, score_pattern, LiteratureEvidence, Quartile, Rater, Stance, Verdict, VerdictLog,
};
use gazelens::synthetic::review_panel;

fn main() {
    let evidence = [
        LiteratureEvidence::new("p1", 1, Quartile::Q1, Stance::Support),
        LiteratureEvidence::new("p1", 2, Quartile::Q2, Stance::Support),
        LiteratureEvidence::new("p1", 3, Quartile::Q1, Stance::Oppose),
        LiteratureEvidence::new("p1", 4, Quartile::Q3, Stance::Neutral),
        LiteratureEvidence::new("p1", 5, Quartile::Q4, Stance::Support),
    ];
    let score = score_pattern(&evidence).expect("score");
    println!("p1 scores {:?} total {} -> {}", score.scores, score.total, score.literature_verdict);

    let ids: Vec<String> = (0..40).map(|i| format!("pattern-{i:02}")).collect();
    let panel = review_panel(&ids, 11, 0.85);
    let scores = score_all(&panel.evidence).expect("score panel");

    let mut log = VerdictLog::default();
    for v in &panel.expert {
        log.submit(v.clone());
    }
    let expert = log.current(Rater::Expert);
    let (lit, exp): (Vec<Verdict>, Vec<Verdict>) =
        scores.iter().map(|s| (s.literature_verdict, expert[&s.pattern_id])).unzip();
    let k = cohen_kappa(&lit, &exp).expect("kappa");
    println!(
        "{} patterns: observed {:.3}, chance {:.3}, kappa {:.3}, consistent {}",
        k.n, k.p_o, k.p_e, k.kappa, k.consistent
    );
    println!("contingency {:?}", k.contingency.0);
}
