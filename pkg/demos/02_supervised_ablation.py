# Supervised training and a small fusion ablation
#
# Static distractors look exactly like the moving object, so an
# appearance-only model cannot tell them apart; the flow branch can.
# Budgets here are a fraction of the pinned benchmark so the script runs in a
# few minutes on a laptop CPU. Pass a step count to change it.

import sys

from flowseg_uda.ablation import ROWS, AblationResult, format_table
from flowseg_uda.benchmarks import DISTRACTOR, desk_config, distractor_false_positive
from flowseg_uda.evaluate import evaluate_model
from flowseg_uda.train import train_supervised

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 500
train, val = DISTRACTOR.train_split(), DISTRACTOR.val_split()
print(f"{len(train)} training frames, {len(val)} validation frames, {steps} steps per variant")

results, fp = [], {}
for row in ROWS:
    cfg = desk_config(steps, seed=0, **row.overrides())
    model, history = train_supervised(cfg, train.samples)
    report = evaluate_model(model, val.samples)
    results.append(AblationResult(row, report.j_mean, report.f_mean))
    fp[row.name] = distractor_false_positive(model, val)
    print(f"{row.name:18} final loss {history.column('l_s')[-10:].mean():.3f}", flush=True)

print()
print(format_table(results), end="")

# How much of the distractor area each variant wrongly segments.
for name, value in fp.items():
    print(f"{name:18} distractor FP IoU {value:.3f}")
