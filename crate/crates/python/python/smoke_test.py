import math

import mlmi


def test_params():
    assert mlmi.select_params(7, 4) == (6, 3)
    assert mlmi.select_params(5, 4) == (4, 0)


def test_kernels():
    want = math.log(1 + math.sqrt(2)) + (1 - math.sqrt(2)) / 3
    assert abs(mlmi.integrated_kernel(1.0, 1.0) - want) < 1e-12
    assert mlmi.softened_kernel(0.9, 0.8, 4, 2, 0.125) == mlmi.integrated_kernel(0.9, 0.8)


def test_evaluate():
    values, ops = mlmi.evaluate(5, 5)
    assert len(values) == 33 and len(values[0]) == 33
    assert ops == 1089
    err = mlmi.fast_error(5, 4)
    assert abs(err - 2.05e-4) < 0.1e-4


def test_errors():
    try:
        mlmi.evaluate(5, 4, strategy="bogus")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")


if __name__ == "__main__":
    test_params()
    test_kernels()
    test_evaluate()
    test_errors()
    print("smoke test passed")
