"""
Relative timing benchmark: fit time per method on simulated scenarios
"""

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).resolve().parent.parent))

from src.estimation.baselines import fit_by_name  # noqa: E402
from src.simulation.runner import DEFAULT_METHODS  # noqa: E402
from src.simulation.scenarios import Scenario, generate_dataset  # noqa: E402
from src.utils.logger import setup_logger  # noqa: E402

EL_BASED = ('proposed', 'el-naive')
GEE_BASED = ('gee-naive', 'lin')


class PerformanceBenchmark:
    """Time every estimator on the same simulated datasets"""

    def __init__(self, scenarios: Sequence[str] = ('C1', 'C2', 'C3', 'C4'), n: int = 300,
                 reps: int = 10, seed: int = 0):
        self.scenarios = list(scenarios)
        self.n = n
        self.reps = reps
        self.seed = seed
        self.results: Dict[str, Dict[str, List[float]]] = {}

    def benchmark_scenario(self, name: str):
        print(f"Benchmarking {name} (n={self.n}, reps={self.reps})...")
        sc = Scenario.preset(name, self.n)
        timings: Dict[str, List[float]] = {m: [] for m in DEFAULT_METHODS}

        for r in range(self.reps):
            ds = generate_dataset(sc, self.seed ^ r)
            for method in DEFAULT_METHODS:
                start = time.perf_counter()
                fit_by_name(method, ds)
                timings[method].append(time.perf_counter() - start)

        self.results[name] = timings
        for method, values in timings.items():
            print(f"  {method:<10} avg {np.mean(values) * 1000:.1f}ms")

    def summary(self) -> pd.DataFrame:
        rows = []
        for name, timings in self.results.items():
            for method, values in timings.items():
                rows.append({
                    'scenario': name,
                    'method': method,
                    'mean_seconds': float(np.mean(values)),
                    'p95_seconds': float(np.percentile(values, 95)),
                })
        return pd.DataFrame(rows)

    def check_ordering(self) -> bool:
        """EL-based fits are expected to be slower than GEE-based fits"""
        ok = True
        for name, timings in self.results.items():
            slowest_gee = max(np.mean(timings[m]) for m in GEE_BASED)
            fastest_el = min(np.mean(timings[m]) for m in EL_BASED)
            if fastest_el <= slowest_gee:
                print(f"⚠️ {name}: EL-based ({fastest_el:.4f}s) not slower than GEE-based ({slowest_gee:.4f}s)")
                ok = False
        return ok

    def save_results(self, filename='benchmark_results.json'):
        """Save results to JSON"""
        serializable = {
            name: {method: [float(x) for x in values] for method, values in timings.items()}
            for name, timings in self.results.items()
        }
        with open(filename, 'w') as f:
            json.dump(serializable, f, indent=2)
        print(f"Results saved to {filename}")


def main() -> int:
    parser = argparse.ArgumentParser(description="Estimator timing benchmark")
    parser.add_argument("--scenarios", default="C1,C2,C3,C4")
    parser.add_argument("--n", type=int, default=300)
    parser.add_argument("--reps", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    setup_logger("benchmark", "WARNING")
    benchmark = PerformanceBenchmark(args.scenarios.split(','), args.n, args.reps, args.seed)
    for name in benchmark.scenarios:
        benchmark.benchmark_scenario(name)

    print(benchmark.summary().to_string(index=False))
    benchmark.save_results()
    return 0 if benchmark.check_ordering() else 1


if __name__ == "__main__":
    sys.exit(main())
