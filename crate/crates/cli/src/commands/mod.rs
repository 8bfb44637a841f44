pub mod convert;
pub mod evaluate;
pub mod finetune;
pub mod fixtures;
pub mod pretrain;
pub mod stats;
pub mod sweep;

use std::path::Path;

use minibert::Result;

/// Write `contents` to `dir/name`, creating `dir` as needed.
pub fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, contents)?;
    Ok(())
}

/// Print the dry-run plan to stdout.
pub fn print_plan(command: &str, lines: &[String], config_toml: &str) {
    println!("dry run: {command}");
    for l in lines {
        println!("  {l}");
    }
    println!("--- resolved config ---");
    print!("{config_toml}");
}
