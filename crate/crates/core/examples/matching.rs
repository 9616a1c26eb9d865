use qecw::eval::{evaluate, DecoderKind, NoiseModel, Scenario};
use qecw::{Basis, CodeKind};

fn main() -> qecw::Result<()> {
    for p in [2e-3, 5e-3, 1e-2] {
        let s = Scenario { kind: CodeKind::RotatedSurface, distance: 5, rounds: 5, basis: Basis::Z, noise: NoiseModel::Circuit, p };
        let shots = s.sample(20_000, 11)?;
        for kind in [DecoderKind::Mwpm, DecoderKind::MwpmUninformed] {
            let r = evaluate(s.decoder(kind, None)?.as_ref(), &shots, &s.info())?;
            println!("p={p:.0e} {kind}: {} / {} failed, per round {:.2e}", r.failures, r.shots, r.per_round.unwrap());
        }
    }
    Ok(())
}
