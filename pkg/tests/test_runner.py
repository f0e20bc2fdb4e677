#!/usr/bin/env python
"""
Pointformer Test Runner

Runs the minimal suite first, then every other tests/test_*.py module.

    python tests/test_runner.py                       # minimal suite, then everything
    python tests/test_runner.py --minimal             # minimal suite only
    python tests/test_runner.py test_geometry test_attention
"""

import os
import sys
import unittest

# Add parent directory to path so we can import pointformer modules
TESTS_DIR = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.dirname(TESTS_DIR))
sys.path.insert(0, TESTS_DIR)


def run_full_suite() -> bool:
    loader = unittest.TestLoader()
    suite = loader.discover(TESTS_DIR, pattern="test_*.py", top_level_dir=TESTS_DIR)
    result = unittest.TextTestRunner(verbosity=1).run(suite)
    return result.wasSuccessful()


def run_modules(names) -> bool:
    names = [n[:-3] if n.endswith(".py") else n for n in names]
    suite = unittest.TestLoader().loadTestsFromNames(names)
    result = unittest.TextTestRunner(verbosity=2).run(suite)
    return result.wasSuccessful()


if __name__ == "__main__":
    from test_minimal import run_minimal_tests

    args = sys.argv[1:]
    print("🚀 Pointformer Development Test Suite")
    print("=" * 50)

    success = run_minimal_tests()
    if success and "--minimal" not in args:
        modules = [a for a in args if not a.startswith("-")]
        if modules:
            print(f"\n🔬 Running {', '.join(modules)}...")
            success = run_modules(modules)
        else:
            print("\n🔬 Running the full suite...")
            success = run_full_suite()

    if success:
        print("\n🎉 All tests passed! The core functionality is working correctly.")
    else:
        print("\n💥 Some tests failed! Please check the output above.")

    sys.exit(0 if success else 1)
