use serde_json::json;

use gaitguard_core::privacy::{run_put_sweep, CorpusSpec, SweepGrid, SweepParams};
use gaitguard_core::synth::WalkerSpec;

use super::args::SweepArgs;
use super::{emit, Ctx};
use crate::error::{AppError, AppResult};
use crate::exec::Parallel;
use crate::io::reports::{format_sweep_csv, sweep_svg};
use crate::io::{read_json, to_json_pretty, write_file};

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum CorpusFile {
    Spec(CorpusSpec),
    Walkers(Vec<WalkerSpec>),
}

pub fn run(a: SweepArgs, ctx: &Ctx) -> AppResult<()> {
    let mut corpus = match read_json::<CorpusFile>(&a.corpus)? {
        CorpusFile::Spec(c) => c,
        CorpusFile::Walkers(w) => CorpusSpec::new(w),
    };
    corpus.seed = ctx.seed;
    let grid = if a.grid == "default" {
        SweepGrid::default()
    } else {
        read_json::<SweepGrid>(std::path::Path::new(&a.grid))?
    };
    let hyper = a.hyper.hyper();
    hyper.validate()?;
    let params = SweepParams {
        bins: a.bins,
        folds: a.folds,
        repeats: a.repeats,
        hyper,
        seed: ctx.seed,
        include_step_length: a.with_step_length,
        events: a.events.params(),
        kpm_patch_px: a.patch,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = a.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| AppError::validation("config", e.to_string()))?;
    let cells = pool.install(|| run_put_sweep(&corpus, &grid, &params, &Parallel))?;
    let out = ctx.out(&a.out);
    write_file(&out, &format_sweep_csv(&cells)?)?;
    if let Some(p) = &a.out_json {
        write_file(&ctx.out(p), to_json_pretty(&cells).as_bytes())?;
    }
    if let Some(p) = &a.plot {
        write_file(&ctx.out(p), sweep_svg(&cells).as_bytes())?;
    }
    emit(&json!({ "rows": cells.len(), "out": out }))
}
