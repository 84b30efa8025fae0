"""Generate a synthetic applicant corpus and simulate biased rater panels.

Every profile carries four text fields whose token statistics track a hidden
quality score, plus a binary outcome. Simulated raters then produce the
SL -> AR -> OF decision funnel with configurable noise and per-group bias.
"""

import numpy as np

from fairaudit import (
    RaterConfig,
    attach_stage_labels,
    binarize_labels,
    generate_synthetic_corpus,
    simulate_raters,
)

profiles, latents = generate_synthetic_corpus(n=500, vocab_size=300, seed=7)

first = profiles[0]
print(f"profile {first.id}: outcome={first.outcome}, q={latents[first.id].q:.3f}, "
      f"group={latents[first.id].group}")
print(f"GCEA text starts: {first.fields['GCEA'][:60]}...")

q = np.array([latents[p.id].q for p in profiles])
offered = np.array([p.outcome == "Offered" for p in profiles])
print(f"\noffer rate {offered.mean():.2f}, corr(q, offered) = "
      f"{np.corrcoef(q, offered)[0, 1]:.3f}")

# noisy raters with a +0.2 threshold shift against group 1
config = RaterConfig(noise_sigma=0.25, bias_shift={1: 0.2}, seed=11)
decisions = simulate_raters(profiles, latents, config)

group = np.array([latents[p.id].group for p in profiles])
print("\nstage  pass-rate  group0  group1")
for stage in ("SL", "AR", "OF"):
    values = decisions[stage].values
    print(f"{stage:5s}  {values.mean():.3f}      {values[group == 0].mean():.3f}   "
          f"{values[group == 1].mean():.3f}")

# attach the simulated labels and recover them through binarization
labeled = attach_stage_labels(profiles, decisions)
recovered = binarize_labels(labeled, "OF")
print(f"\nround-trip through labels intact: "
      f"{np.array_equal(recovered.values, decisions['OF'].values)}")

# rater accuracy against the true outcome drops as noise grows
truth = binarize_labels(profiles, "Type")
for sigma in (0.0, 0.1, 0.25, 0.5):
    noisy = simulate_raters(profiles, latents, RaterConfig(
        noise_sigma=sigma, stage_thresholds=(0.5, 0.5, 0.5), seed=3))
    accuracy = np.mean(noisy["OF"].values == truth.values)
    print(f"sigma={sigma:.2f}: OF accuracy vs outcome = {accuracy:.3f}")
