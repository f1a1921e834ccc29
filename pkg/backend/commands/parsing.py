import argparse
import math
from typing import List, NamedTuple, Tuple


class BetaChoices(NamedTuple):
    betas: List[float]
    thermal_ratios: List[float]


class DickeSpec(NamedTuple):
    n_atoms: int
    boson_cutoff: int
    coupling: float
    sector: str


def float_list(text: str) -> List[float]:
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got '{text}'")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not value > 0 or math.isinf(value):
        raise argparse.ArgumentTypeError(f"expected a finite positive number, got {text}")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def fraction(text: str) -> float:
    """A fraction in (0, 1]."""
    value = _parse_float(text, text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"expected a fraction in (0, 1], got {text}")
    return value


def beta_list(text: str) -> BetaChoices:
    """Comma list of inverse temperatures: numbers, 'inf' (ground state) or 'ratio:x' (one beta for the sweep)."""
    betas, ratios = [], []
    for item in (part.strip() for part in text.split(",")):
        if not item:
            continue
        if item.startswith("ratio:"):
            ratio = _parse_float(item[len("ratio:"):], item)
            if not 0 < ratio < 1:
                raise argparse.ArgumentTypeError(f"probability ratio must lie in (0, 1), got {item}")
            ratios.append(ratio)
            continue
        beta = _parse_float(item, item)
        if math.isnan(beta) or beta < 0:
            raise argparse.ArgumentTypeError(f"beta must be >= 0 or inf, got {item}")
        betas.append(beta)
    if not betas and not ratios:
        raise argparse.ArgumentTypeError("expected at least one beta")
    return BetaChoices(betas, ratios)


def dicke_spec(text: str) -> DickeSpec:
    """'N,M,lambda[,sector]' with sector full, even or odd."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError(f"expected N,M,lambda[,sector], got '{text}'")
    sector = parts[3] if len(parts) == 4 else "full"
    if sector not in ("full", "even", "odd"):
        raise argparse.ArgumentTypeError(f"sector must be full, even or odd, got '{sector}'")
    try:
        return DickeSpec(int(parts[0]), int(parts[1]), float(parts[2]), sector)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N,M,lambda[,sector], got '{text}'")


def _parse_float(text: str, item: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse '{item}' as a number")


def sidecar_paths(out: str) -> Tuple[str, str]:
    """Summary CSV and metadata JSON written next to a sweep result file."""
    stem = out[:-4] if out.lower().endswith(".csv") else out
    return f"{stem}_summary.csv", f"{stem}_meta.json"
