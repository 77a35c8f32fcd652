"""
Test runner for NCS Rate Bounds

Usage: python run_tests.py [--slow] [extra pytest args]
"""
import sys
from pathlib import Path

TEST_DIR = Path(__file__).parent / "tests"


def run_tests(slow: bool = False, extra=None) -> bool:
    """Run the suite; the long Monte Carlo and benchmark synthesis tests only with slow=True"""
    try:
        import pytest
    except ImportError:
        print("❌ pytest not installed. Install with: pip install -r requirements.txt")
        return False

    args = [str(TEST_DIR), "-v", "--tb=short"]
    # overrides the "not slow" default from pyproject.toml
    if slow:
        args += ["-m", "slow or not slow"]
    args += list(extra or [])

    print(f"🧪 Running {'full' if slow else 'fast'} test suite")
    code = pytest.main(args)
    if code == 0:
        print("✅ All tests passed!")
    else:
        print(f"❌ pytest exited with code {int(code)}")
    return code == 0


if __name__ == "__main__":
    argv = sys.argv[1:]
    slow = "--slow" in argv
    success = run_tests(slow=slow, extra=[a for a in argv if a != "--slow"])
    sys.exit(0 if success else 1)
