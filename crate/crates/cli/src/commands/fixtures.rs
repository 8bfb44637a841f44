use minibert::data::generate_fixtures;
use minibert::Result;

use super::print_plan;
use crate::Ctx;

pub fn run(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let fixtures = generate_fixtures(&cfg.fixtures, cfg.seed)?;
    if ctx.dry_run {
        let lines: Vec<String> = fixtures
            .files(cfg.seed)?
            .into_iter()
            .map(|(name, bytes)| {
                format!("{} ({} bytes)", ctx.out.join(name).display(), bytes.len())
            })
            .collect();
        print_plan("fixtures", &lines, &cfg.to_toml()?);
        return Ok(());
    }
    let written = fixtures.write_to(&ctx.out, cfg.seed)?;
    for name in &written {
        println!("{}", ctx.out.join(name).display());
    }
    log::info!("wrote {} fixture files", written.len());
    Ok(())
}
