#!/usr/bin/env python
"""
Starter script untuk estimation toolkit
Memudahkan install, test, benchmark dan simulation sweeps
"""

import sys
import subprocess
import argparse
from pathlib import Path

SCENARIOS = ("C1", "C2", "C3", "C4")


def run_command(cmd, shell=True):
    """Execute shell command"""
    print(f"Running: {cmd}")
    result = subprocess.run(cmd, shell=shell)
    return result.returncode


def test_system(slow=False):
    """Run tests"""
    print("🧪 Running tests...")
    marker = "" if slow else ' -m "not slow"'
    return run_command(f"pytest tests/ -v{marker}")


def coverage():
    """Run tests with coverage"""
    print("🧪 Running tests with coverage...")
    return run_command('pytest tests/ -m "not slow" --cov=src --cov-report=term-missing')


def benchmark():
    """Run timing benchmark"""
    print("📊 Running timing benchmark...")
    return run_command("python benchmarks/performance_benchmark.py")


def simulate(n, reps, seed, out_dir):
    """Run every preset scenario"""
    print(f"🎲 Simulating {', '.join(SCENARIOS)} with n={n}, reps={reps}...")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    status = 0
    for name in SCENARIOS:
        out = Path(out_dir) / f"{name}_n{n}.csv"
        code = run_command(
            f"python -m src.main simulate --scenario {name} --n {n} --reps {reps} "
            f"--seed {seed} --percent-units --out {out}"
        )
        status = status or code
    return status


def install_deps():
    """Install dependencies"""
    print("📦 Installing dependencies...")
    return run_command("pip install -r requirements.txt")


def setup_env():
    """Setup environment"""
    print("⚙️ Setting up environment...")
    if not Path(".env").exists():
        run_command("cp .env.example .env")
        print("✅ .env file created. Edit tolerances there if needed.")
    else:
        print("ℹ️ .env file already exists")


def main():
    """Main entry point"""
    parser = argparse.ArgumentParser(
        description="Estimation Toolkit Manager"
    )

    parser.add_argument(
        "action",
        choices=["test", "coverage", "benchmark", "simulate", "install", "setup"],
        help="Action to perform"
    )
    parser.add_argument("--slow", action="store_true", help="Include slow Monte Carlo tests")
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--reps", type=int, default=500)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out-dir", default="reports")

    args = parser.parse_args()

    if args.action == "test":
        return test_system(args.slow)

    elif args.action == "coverage":
        return coverage()

    elif args.action == "benchmark":
        return benchmark()

    elif args.action == "simulate":
        return simulate(args.n, args.reps, args.seed, args.out_dir)

    elif args.action == "install":
        return install_deps()

    elif args.action == "setup":
        setup_env()
        return install_deps()


if __name__ == "__main__":
    sys.exit(main())
