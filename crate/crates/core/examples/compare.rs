use qecw::eval::{compare, Decoder, DecoderKind, NoiseModel, Scenario};
use qecw::{Basis, CodeKind};

fn main() -> qecw::Result<()> {
    let s = Scenario { kind: CodeKind::RotatedSurface, distance: 3, rounds: 1, basis: Basis::Z, noise: NoiseModel::Perfect, p: 0.1 };
    let shots = s.sample(100_000, 1)?;
    let kinds = [DecoderKind::Mlo, DecoderKind::Mwpm, DecoderKind::MwpmUninformed, DecoderKind::Majority];
    let decoders = kinds.iter().map(|&k| s.decoder(k, None)).collect::<qecw::Result<Vec<_>>>()?;
    let refs: Vec<&dyn Decoder> = decoders.iter().map(|d| d.as_ref()).collect();
    let cmp = compare(&refs, &shots, &s.info())?;
    print!("{}", cmp.table());
    let pair = cmp.paired(0, 1);
    println!("ml vs mwpm: {} / {} disagreements, McNemar {:.2}", pair.only_first, pair.only_second, pair.mcnemar());
    Ok(())
}
