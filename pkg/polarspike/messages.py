"""
Templates of the messages printed by the command-line tool.
"""

# Printed to stderr when a command fails with a runtime, structure or I/O error.
ERROR = "{command}: error: {error}"

DATASET_WRITTEN = "Wrote {n} {kind} samples ({num_classes} classes) to {path}."

TRAINED = (
    "Trained ANN saved to {path}.\n"
    "Accuracy: train {train_accuracy:.4f}, test {test_accuracy:.4f}, "
    "converted SNN at T=1 {snn_accuracy:.4f}.")

CONVERTED = (
    "Converted {ann_layers} ANN layers into {snn_layers} SNN stages "
    "({firing} firing). Saved to {path}.")

RUN_DONE = (
    "Simulated {n} samples for T={T}: {events} spike events. "
    "Report saved to {path}.")

RUN_ACCURACY = "Accuracy against labels: {accuracy:.4f}."

VERIFY_PASSED = (
    "T=1 equivalence holds on {n} samples: max |diff| {max_abs_diff:.3g} "
    "(tolerance {tolerance:g}), argmax agreement {argmax_agreement:.4f}, "
    "{index_mismatches} spike-count mismatches.")

VERIFY_FAILED = (
    "T=1 equivalence FAILED on {n} samples: max |diff| {max_abs_diff:.3g} "
    "(tolerance {tolerance:g}), argmax agreement {argmax_agreement:.4f}, "
    "{index_mismatches} spike-count mismatches.")

GRID_BAD_LEVELS = "--L must be >= 1, got {levels}"

GRID_BAD_STEP = (
    "--step must be 'auto' or a multiple of 1/L = {lattice:g} in (0, 1], "
    "got {step!r}")

ENTROPY_GRID = (
    "Entropy ratio grid L={L}, theta={theta:g} ({formula}): {cells} cells written to {path}.\n"
    "Closest to lossless: alpha={best_alpha:g}, beta={best_beta:g}, R={best_R:.4f}.\n"
    "Largest R: {max_R:.4f}. Cells per regime: {loss} loss, {near_lossless} near-lossless, "
    "{distortion} distortion.")

ALPHA_BETA_SWEEP = (
    "Trained {cells} models over the (alpha, beta) grid L={L}, theta={theta:g} ({formula}), "
    "results written to {path}.\n"
    "Best test accuracy {best_accuracy:.4f} at alpha={best_alpha:g}, beta={best_beta:g}, "
    "where R={R_at_best:.4f}.")

ENERGY = (
    "N = {N} spikes ({N_1e8:.4f} x 1e8) over T={T} timesteps: "
    "P = {P:.4f} W (eta={eta:g} s, xi={xi:g} J).")

ENERGY_COMPARE = (
    "Compared the polar and the binary IF baseline networks on {n} samples, "
    "rows written to {path}.")

ENERGY_COMPARE_ROW = (
    "T={T}: polar N={N_polar} P={P_polar:.4g} W, baseline N={N_baseline} P={P_baseline:.4g} W")

ERROR_ANALYSIS = "Wrote {rows} rows for T in {timesteps} to {path}."

HISTORY_EMPTY = "No runs recorded yet."

HISTORY_LEDGER_DISABLED = "The results ledger is disabled (RESULTS_DB_URL is not set)."

LEDGER_NOT_MIGRATED = (
    "The results ledger has no tables yet, run `alembic upgrade head` to create them.")

HISTORY_ROW = "#{id} {created_at:%Y-%m-%d %H:%M:%S} {command} exit={exit_code} {metrics}"
