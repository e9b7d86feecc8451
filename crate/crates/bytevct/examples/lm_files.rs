//! Saving models to disk: a tabular model as JSON, and a replay file that
//! records the exact contexts a session queried.

use bytevct::lm::{Recorder, ReplayLM, TabularLM};
use bytevct::oracle::toy_instance;
use bytevct::sampler::prefix_logprob;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = toy_instance(9, 6);
    let dir = std::env::temp_dir().join(format!("bytevct-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let prompt = toy.texts.iter().find(|t| toy.tk.encode(t).len() <= 6).ok_or("no supported text")?;

    let table = dir.join("toy.table.json");
    toy.lm.save(&table)?;
    let back = TabularLM::load(&table)?;
    let a = prefix_logprob(&toy.lm, &toy.tk, prompt)?;
    let b = prefix_logprob(&back, &toy.tk, prompt)?;
    println!("table {} ({} bytes): {a} vs reloaded {b}", table.display(), std::fs::metadata(&table)?.len());

    let rec = Recorder::new(&toy.lm);
    let live = prefix_logprob(&rec, &toy.tk, prompt)?;
    let replay_path = dir.join("toy.replay");
    rec.into_replay().save(&replay_path)?;
    let replay = ReplayLM::load(&replay_path)?;
    let again = prefix_logprob(&replay, &toy.tk, prompt)?;
    // rows are stored as f32
    println!("replay {} ({} contexts): {live} vs replayed {again}", replay_path.display(), replay.len());

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
