"""Shared setup for the experiment scripts: the reference long-tail data set."""

import argparse
from dataclasses import replace

from tailgame.data import SynthSpec, generate_synthetic, split
from tailgame.rewards import CuriositySpec
from tailgame.training import TrainConfig

REFERENCE = SynthSpec(num_labels=50, feature_dim=20, num_samples=8000, power_exponent=1.5, base_prevalence=0.6)
BASE = TrainConfig(n_players=3, rho=0.2, epochs=40, curiosity=CuriositySpec(0.5, 0.2))


def reference_splits(seed: int = 0):
    return split(generate_synthetic(REFERENCE, seed=seed), (0.25, 0.25, 0.5), seed=seed)


def parser(doc: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--epochs", type=int, default=BASE.epochs)
    p.add_argument("--threshold-protocol", choices=("fixed", "validation_tuned"), default="fixed")
    return p


def base_config(args) -> TrainConfig:
    return replace(BASE, epochs=args.epochs, threshold_protocol=args.threshold_protocol)
