import json
import math

import numpy as np
import pytest

import tempdet as td
from tempdet import InputError, NumericError, TaskDescriptor, TemperatureCoefficients

# Frozen oracle values from a 40-digit arithmetic evaluation of the model.
ANCHOR_ORACLE = 24.888946447437202354
PLAIN_512_ORACLE = 11.673987164830136093
CN_768_101_ORACLE = 8.7768277346106301691


class TestDefaults:
    def test_table_exact(self):
        plain = td.default_coefficients("plain")
        assert (plain.alpha, plain.beta, plain.gamma, plain.delta) == \
            (0.7239, -4.706, 0.0, 0.0)
        csg = td.default_coefficients("csg")
        assert (csg.alpha, csg.beta, csg.gamma, csg.delta) == \
            (0.4111, 6.848, -2.024, 0.0)
        cn = td.default_coefficients("cn")
        assert (cn.alpha, cn.beta, cn.gamma, cn.delta) == \
            (0.4051, 6.656, 0.0, -1.973)
        csgcn = td.default_coefficients("csgcn")
        assert (csgcn.alpha, csgcn.beta, csgcn.gamma, csgcn.delta) == \
            (0.3192, 20.74, 3.746, -7.380)
        for variant in td.COEFFICIENT_VARIANTS:
            coeffs = td.default_coefficients(variant)
            assert coeffs.clip_lo == 1.0
            assert coeffs.clip_hi == 512.0

    def test_baselines_have_no_coefficients(self):
        with pytest.raises(InputError):
            td.default_coefficients("unit")
        with pytest.raises(InputError):
            td.default_coefficients("sqrt_m")

    def test_unknown_variant(self):
        with pytest.raises(InputError):
            td.default_coefficients("fancy")


class TestEstimate:
    def test_anchor(self):
        value = td.estimate_temperature(
            TaskDescriptor(m=2048, cn=8, csg=3.85), "csgcn")
        assert abs(value - 24.88) <= 0.01
        np.testing.assert_allclose(value, ANCHOR_ORACLE, rtol=1e-12)

    def test_plain_512(self):
        value = td.estimate_temperature(TaskDescriptor(m=512), "plain")
        np.testing.assert_allclose(value, PLAIN_512_ORACLE, rtol=1e-12)
        assert round(value, 3) == 11.674

    def test_cn_768_101(self):
        value = td.estimate_temperature(TaskDescriptor(m=768, cn=101), "cn")
        np.testing.assert_allclose(value, CN_768_101_ORACLE, rtol=1e-12)
        assert round(value, 3) == 8.777

    def test_unit(self):
        assert td.estimate_temperature(TaskDescriptor(m=512), "unit") == 1.0

    def test_sqrt_m(self):
        assert td.estimate_temperature(TaskDescriptor(m=64), "sqrt_m") == 8.0
        value = td.estimate_temperature(TaskDescriptor(m=512), "sqrt_m")
        np.testing.assert_allclose(value, math.sqrt(512), rtol=0)

    def test_clip_low_m1(self):
        # plain at m=1 evaluates to 0.7239 - 4.706 < 0, clipped up to 1.
        value, detail = td.estimate_temperature_detail(
            TaskDescriptor(m=1), "plain")
        assert value == 1.0
        assert detail["clipped"] is True
        assert detail["raw"] < 0

    def test_clip_high(self):
        coeffs = TemperatureCoefficients(alpha=100.0, beta=0.0)
        value = td.estimate_temperature(TaskDescriptor(m=1024), "plain", coeffs)
        assert value == 512.0

    def test_monotone_in_m(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            coeffs = TemperatureCoefficients(
                alpha=float(rng.uniform(0.01, 5.0)),
                beta=float(rng.uniform(-50.0, 50.0)),
            )
            values = [td.estimate_temperature(TaskDescriptor(m=m), "plain", coeffs)
                      for m in (1, 4, 16, 64, 256, 1024, 4096)]
            assert all(b >= a for a, b in zip(values, values[1:]))

    def test_clip_containment(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            coeffs = TemperatureCoefficients(
                alpha=float(rng.uniform(-10, 10)),
                beta=float(rng.uniform(-200, 200)),
                gamma=float(rng.uniform(-20, 20)),
                delta=float(rng.uniform(-20, 20)),
            )
            task = TaskDescriptor(m=int(rng.integers(1, 5000)),
                                  cn=int(rng.integers(2, 1000)),
                                  csg=float(rng.uniform(0.01, 100)))
            value = td.estimate_temperature(task, "csgcn", coeffs)
            assert coeffs.clip_lo <= value <= coeffs.clip_hi

    def test_variant_consistency(self):
        coeffs = TemperatureCoefficients(alpha=0.5, beta=2.0)
        task = TaskDescriptor(m=300, cn=17, csg=9.5)
        assert td.estimate_temperature(task, "csgcn", coeffs) == \
            td.estimate_temperature(task, "plain", coeffs)

    def test_determinism(self):
        task = TaskDescriptor(m=2048, cn=8, csg=3.85)
        a = td.estimate_temperature(task, "csgcn")
        b = td.estimate_temperature(task, "csgcn")
        assert a == b

    def test_missing_csg(self):
        with pytest.raises(InputError):
            td.estimate_temperature(TaskDescriptor(m=100, cn=10), "csg")

    def test_missing_cn(self):
        with pytest.raises(InputError):
            td.estimate_temperature(TaskDescriptor(m=100, csg=2.0), "cn")

    def test_cn_must_be_at_least_two_when_used(self):
        with pytest.raises(InputError):
            td.estimate_temperature(TaskDescriptor(m=100, cn=1), "cn")
        # The same descriptor is fine for a variant that ignores cn.
        assert td.estimate_temperature(TaskDescriptor(m=100, cn=1), "unit") == 1.0

    def test_unknown_variant(self):
        with pytest.raises(InputError):
            td.estimate_temperature(TaskDescriptor(m=100), "powers")

    def test_overflowing_model_is_numeric_error(self):
        coeffs = TemperatureCoefficients(alpha=1e308, beta=0.0)
        with pytest.raises(NumericError):
            td.estimate_temperature(TaskDescriptor(m=16), "plain", coeffs)


class TestValidation:
    def test_task_descriptor(self):
        with pytest.raises(InputError):
            TaskDescriptor(m=0)
        with pytest.raises(InputError):
            TaskDescriptor(m=-3)
        with pytest.raises(InputError):
            TaskDescriptor(m=2.5)
        with pytest.raises(InputError):
            TaskDescriptor(m=10, csg=0.0)
        with pytest.raises(InputError):
            TaskDescriptor(m=10, csg=-1.0)
        with pytest.raises(InputError):
            TaskDescriptor(m=10, csg=float("nan"))
        with pytest.raises(InputError):
            TaskDescriptor(m=10, cn=0)

    def test_coefficients(self):
        with pytest.raises(InputError):
            TemperatureCoefficients(alpha=float("inf"), beta=0.0)
        with pytest.raises(InputError):
            TemperatureCoefficients(alpha=1.0, beta=float("nan"))
        with pytest.raises(InputError):
            TemperatureCoefficients(alpha=1.0, beta=0.0, clip_lo=0.0)
        with pytest.raises(InputError):
            TemperatureCoefficients(alpha=1.0, beta=0.0, clip_lo=5.0, clip_hi=5.0)


class TestSerialization:
    def test_round_trip_defaults(self, tmp_path):
        for variant in td.COEFFICIENT_VARIANTS:
            coeffs = td.default_coefficients(variant)
            path = tmp_path / f"{variant}.json"
            td.save_coefficients(str(path), variant, coeffs)
            got_variant, got = td.load_coefficients(str(path))
            assert got_variant == variant
            assert got == coeffs

    def test_round_trip_random_bits(self, tmp_path):
        rng = np.random.default_rng(3)
        for i in range(25):
            coeffs = TemperatureCoefficients(
                alpha=float(rng.uniform(-10, 10)),
                beta=float(rng.uniform(-100, 100)),
                gamma=float(rng.standard_normal() * rng.uniform(0, 30)),
                delta=float(rng.standard_normal() * rng.uniform(0, 30)),
                clip_lo=float(rng.uniform(0.01, 2.0)),
                clip_hi=float(rng.uniform(10.0, 1000.0)),
            )
            path = tmp_path / f"c{i}.json"
            td.save_coefficients(str(path), "csgcn", coeffs)
            _, got = td.load_coefficients(str(path))
            # Bit-exact: the decimal form must carry >= 15 significant digits.
            assert got == coeffs

    def test_document_fields(self):
        doc = td.coefficients_to_document("cn", td.default_coefficients("cn"))
        assert set(doc) == {"variant", "alpha", "beta", "gamma", "delta",
                            "clip_lo", "clip_hi"}
        assert doc["variant"] == "cn"
        text = json.dumps(doc)
        parsed = json.loads(text)
        assert parsed == doc

    def test_document_errors(self):
        with pytest.raises(InputError):
            td.coefficients_from_document({"alpha": 1.0, "beta": 2.0})
        with pytest.raises(InputError):
            td.coefficients_from_document({"variant": "plain", "beta": 2.0})
        with pytest.raises(InputError):
            td.coefficients_from_document(
                {"variant": "plain", "alpha": "big", "beta": 2.0})
        with pytest.raises(InputError):
            td.coefficients_from_document(
                {"variant": "unit", "alpha": 1.0, "beta": 2.0})
        with pytest.raises(InputError):
            td.coefficients_from_document(["not", "a", "mapping"])

    def test_load_rejects_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope", encoding="utf-8")
        with pytest.raises(InputError):
            td.load_coefficients(str(path))
