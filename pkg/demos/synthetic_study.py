"""End-to-end screening study on a small synthetic cohort.

The script writes WAV files for a synthetic cohort, extracts the 131
features, looks at the strongest single-feature correlations, ranks the
features with the LASSO path, sweeps the subset size with repeated
stratified cross-validation, prunes the best subset stepwise and finally
trains the model that would be shipped.

Extraction dominates the run time (about four seconds per speaker).

    python3 demos/synthetic_study.py [--speakers 12] [--out demo-run]
"""
import argparse
from pathlib import Path

from vowelmark import featureset, model, select
from vowelmark.synth import synth_corpus

parser = argparse.ArgumentParser()
parser.add_argument("--speakers", type=int, default=12, help="speakers per class")
parser.add_argument("--out", default="demo-run")
parser.add_argument("--max-features", type=int, default=15)
args = parser.parse_args()
out = Path(args.out)

manifest = synth_corpus(out / "wav", n_als=args.speakers, n_hc=args.speakers, seed=2024, duration=3.0)
print(f"wrote {len(manifest.entries)} recordings to {out / 'wav'}")

table, log_rows = featureset.extract_corpus(manifest)
table.to_csv(out / "features.csv")
flagged = {s: m for s, m in table.missing_counts().items() if m}
print(f"feature table: {len(table)} speakers x {len(table.names)} features; "
      f"speakers with missing values: {flagged or 'none'}")

print("\nstrongest correlations with the label:")
print(featureset.format_survey(featureset.correlation_survey(table), top=6), end="")

ranking = select.rank_lasso(table)
folds = min(8, args.speakers)
cv = model.CrossValidator(table, folds=folds, repetitions=10)
print(f"\naccuracy against subset size ({folds}-fold, 10 repetitions):")
best_n, best_acc = 1, -1.0
for n in range(1, args.max_features + 1):
    acc = cv.accuracy(ranking.top(n))
    print(f"  N={n:<3} {acc:6.1f} %")
    if acc > best_acc:
        best_n, best_acc = n, acc

pruned = select.backward_stepwise(ranking.top(best_n), cv.accuracy)
print(f"\nstepwise pruning of the best {best_n} features:")
print(pruned.report(), end="")
print(cv.evaluate(pruned.features).summary())

final = model.fit_final_model(table, pruned.features)
model.save_model(final, out / "model.json")
print(f"\nmodel with {len(final.feature_names)} features saved to {out / 'model.json'}")
