# Adapting a trained model to an unlabelled, differently styled domain
#
# The source model never saw the target palette or shapes and fails there.
# Two remedies: adapt a cloned encoder against the frozen source model
# (separated weights), or train jointly with a domain confusion term on the
# shared encoder (shared weights). Target labels are only used for scoring.

import sys

from flowseg_uda.benchmarks import SHIFT, desk_config
from flowseg_uda.evaluate import evaluate_model
from flowseg_uda.train import discriminator_accuracy, train_supervised, train_uda_separated, train_uda_shared

src_train, src_val = SHIFT.source.train_split().samples, SHIFT.source.val_split().samples
tgt_train, tgt_val = SHIFT.target_split().samples, SHIFT.target_val_split().samples
# Every stage uses the same number of steps (1000 by default).
steps = int(sys.argv[1]) if len(sys.argv) > 1 else SHIFT.source.steps
cfg = desk_config(steps, seed=0)

source_model, _ = train_supervised(cfg, src_train)
print(f"source only    source J {evaluate_model(source_model, src_val).j_mean:.3f}  "
      f"target J {evaluate_model(source_model, tgt_val).j_mean:.3f}")

sep_cfg = cfg.replace(regime="separated", uda_epochs=5, steps_per_epoch=steps // 5, uda_lr=1e-3)
separated, history = train_uda_separated(sep_cfg, source_model, src_train, tgt_train)
print(f"separated      target J {evaluate_model(separated, tgt_val, 't').j_mean:.3f}  "
      f"held-out D accuracy {discriminator_accuracy(separated, src_val, tgt_val, 't'):.3f}")

# The discriminator should end up near chance: it can no longer tell the domains apart.
acc = history.column("disc_acc")
print("training D accuracy by fifth:", [round(float(acc[i:i + len(acc) // 5].mean()), 2)
                                         for i in range(0, len(acc), len(acc) // 5)])

shared, history = train_uda_shared(cfg.replace(regime="shared"), src_train, tgt_train)
print(f"shared         source J {evaluate_model(shared, src_val).j_mean:.3f}  "
      f"target J {evaluate_model(shared, tgt_val).j_mean:.3f}")
print("lambda1 per epoch:", sorted(set(history.column("lambda1").tolist())))
