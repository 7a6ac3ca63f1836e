// temp experiment
use cmid_core::envs::{CorrelationSpec, Phase, PointMass, PointMassParams, RenderMode};
use cmid_core::eval::{evaluate_policy, RandomPolicy, WidthOraclePolicy, ColourCuePolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let params = PointMassParams::default();
    let spec = CorrelationSpec::new(0.5, Phase::Uncorrelated, false).unwrap();
    let mut env = PointMass::new(params, spec, RenderMode::FactorVector);
    let mut rng = ChaCha8Rng::seed_from_u64(12345);
    let mut oracle = WidthOraclePolicy::new(params);
    let o = evaluate_policy(&mut env, &mut oracle, 2000, &mut rng).unwrap();
    let om = o.iter().map(|e| e.ret).sum::<f64>() / o.len() as f64;
    println!("oracle mean over 2000 eps: {om:.4}");

    let mut rng = ChaCha8Rng::seed_from_u64(999);
    let mut random = RandomPolicy::new(ChaCha8Rng::seed_from_u64(7), 1);
    let r = evaluate_policy(&mut env, &mut random, 2000, &mut rng).unwrap();
    let rm = r.iter().map(|e| e.ret).sum::<f64>() / r.len() as f64;
    println!("random mean over 2000 eps: {rm:.4}");

    // Wrong-sign policy: colour cue at rho=1 reversed.
    let rev = CorrelationSpec::new(1.0, Phase::Reversed, false).unwrap();
    let mut env = PointMass::new(params, rev, RenderMode::FactorVector);
    let mut colour = ColourCuePolicy::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let c = evaluate_policy(&mut env, &mut colour, 2000, &mut rng).unwrap();
    let cm = c.iter().map(|e| e.ret).sum::<f64>() / c.len() as f64;
    println!("wrong-sign mean over 2000 eps: {cm:.4}");
}
