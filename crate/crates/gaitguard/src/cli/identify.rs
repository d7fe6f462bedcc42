use gaitguard_core::identity::{evaluate_cv, Dataset};

use super::args::IdentifyArgs;
use super::{emit, Ctx};
use crate::error::AppResult;
use crate::io::features::{read_features_csv, scalar_feature_count};
use crate::io::reports::{format_confusion_csv, IdentifyReport};
use crate::io::{to_json_pretty, write_file};

pub fn run(a: IdentifyArgs, ctx: &Ctx) -> AppResult<()> {
    let mut rows = Vec::new();
    for p in &a.features {
        rows.extend(read_features_csv(p)?);
    }
    let hyper = a.hyper.hyper();
    hyper.validate()?;
    let mut data = Dataset::from_rows(&rows, !a.no_step_length);
    if a.shuffle_labels {
        data = data.shuffled_labels(ctx.seed);
    }
    data.validate(Some(a.folds))?;
    let report = evaluate_cv(&data, &hyper, a.folds, a.repeats, ctx.seed)?;
    if let Some(p) = &a.confusion_csv {
        write_file(&ctx.out(p), &format_confusion_csv(&report)?)?;
    }
    let full = IdentifyReport {
        report,
        n_rows: data.len(),
        include_step_length: !a.no_step_length,
        folds: a.folds,
        repeats: a.repeats,
        seed: ctx.seed,
        scalar_features: scalar_feature_count(&rows),
    };
    let text = to_json_pretty(&full);
    match &a.out {
        Some(p) => {
            let out = ctx.out(p);
            write_file(&out, text.as_bytes())?;
            emit(&serde_json::json!({
                "weighted_f1_mean": full.report.weighted_f1_mean,
                "out": out,
            }))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
