import pytest
from hypothesis import given, strategies as st

from glyms.ions import (
    ChargeCarrier,
    IonConfiguration,
    IonError,
    MzTolerance,
    NeutralExchange,
    NeutralLoss,
    enumerate_ion_configurations,
    matches,
    mz,
)

NA = ChargeCarrier("Na+", 22.98922, 1)
H = ChargeCarrier("H+", 1.00728, 1)
DEPROT = ChargeCarrier("-H", -1.00728, -1)
H_NA = NeutralExchange("H>Na", 1.00728, 22.98922, 3)
WATER_LOSS = NeutralLoss("H2O", 18.010565, 1)

M = 342.1162  # disaccharide oracle value from the element table


def test_mz_single_sodium():
    cfg = IonConfiguration(((NA, 1),))
    assert mz(M, cfg) == pytest.approx((M + 22.98922) / 1, abs=1e-6)
    assert round(mz(342.1162, IonConfiguration(((ChargeCarrier("Na+", 22.9892, 1), 1),))), 4) == 365.1054


def test_mz_double_sodium():
    cfg = IonConfiguration(((ChargeCarrier("Na+", 22.9892, 1), 2),))
    assert mz(342.1162, cfg) == pytest.approx((342.1162 + 2 * 22.9892) / 2, abs=1e-9)
    assert round(mz(342.1162, cfg), 4) == 194.0473


def test_empty_carriers_rejected():
    with pytest.raises(IonError):
        IonConfiguration(())


def test_mixed_polarity_rejected():
    with pytest.raises(IonError):
        IonConfiguration(((NA, 1), (DEPROT, 1)))


def test_exchange_shifts_mz():
    base = IonConfiguration(((NA, 1),))
    exchanged = IonConfiguration(((NA, 1),), ((NeutralExchange("H>Na", 1.00728, 22.98922), 1),))
    # one H->Na exchange shifts by (22.98922 - 1.00728)/|z|
    assert mz(M, exchanged) - mz(M, base) == pytest.approx(21.98194, abs=1e-9)


def test_loss_shifts_mz_down():
    base = IonConfiguration(((NA, 1),))
    lossy = IonConfiguration(((NA, 1),), (), ((WATER_LOSS, 1),))
    assert mz(M, base) - mz(M, lossy) == pytest.approx(18.010565, abs=1e-9)


def test_matches_da():
    assert matches(365.1054, 365.1054, MzTolerance(0.01, "Da"))
    assert not matches(365.1154, 365.1054, MzTolerance(0.005, "Da"))


def test_matches_ppm():
    # brute-force ppm oracle: delta of 0.0004 Da on 365.1054 is
    # 0.0004 / 365.1054 * 1e6 = 1.0955 ppm
    delta_ppm = (365.1058 - 365.1054) / 365.1054 * 1e6
    assert delta_ppm < 2
    assert matches(365.1058, 365.1054, MzTolerance(2, "ppm"))
    assert matches(365.1058, 365.1054, MzTolerance(5, "ppm"))
    assert not matches(365.1058, 365.1054, MzTolerance(1, "ppm"))


def test_matches_ppm_anchored_on_theoretical():
    tol = MzTolerance(5, "ppm")
    theo = 1000.0
    assert matches(theo + tol.window(theo), theo, tol)
    # observed anchor would give a slightly different window
    assert tol.window(theo) != tol.window(theo + 1.0)


def test_enumerate_single():
    configs = enumerate_ion_configurations([H], 1)
    assert len(configs) == 1
    assert configs[0].signature == "1H+"


def test_enumerate_two_species_two_charges():
    # multisets of size 1 and 2 over {H+, Na+}: 2 + 3 = 5
    configs = enumerate_ion_configurations([H, NA], 2)
    assert len(configs) == 5
    assert [abs(c.charge) for c in configs] == [1, 1, 2, 2, 2]


def test_enumerate_exchanges_and_losses():
    # exchange counts 0..2 times loss counts 0..1 = 3 * 2 = 6
    ex = NeutralExchange("H>Na", 1.00728, 22.98922, 2)
    configs = enumerate_ion_configurations([H], 1, [ex], [WATER_LOSS])
    assert len(configs) == 6


def test_enumerate_rejects_empty():
    with pytest.raises(IonError):
        enumerate_ion_configurations([], 1)


def test_enumerate_stable_and_duplicate_free():
    configs = enumerate_ion_configurations([H, NA], 3, [H_NA], [WATER_LOSS])
    again = enumerate_ion_configurations([H, NA], 3, [H_NA], [WATER_LOSS])
    signatures = [c.signature for c in configs]
    assert signatures == [c.signature for c in again]
    assert len(signatures) == len(set(signatures))


@given(st.integers(min_value=1, max_value=5), st.floats(min_value=100, max_value=5000))
def test_charge_scaling(z, neutral):
    cfg = IonConfiguration(((NA, z),))
    assert mz(neutral, cfg) == pytest.approx((neutral + z * NA.mass_delta) / z, abs=1e-9)


@given(
    st.floats(min_value=100, max_value=5000),
    st.floats(min_value=100, max_value=5000),
    st.floats(min_value=1e-4, max_value=10),
)
def test_matches_symmetric_in_da_mode(a, b, tol):
    t = MzTolerance(tol, "Da")
    assert matches(a, b, t) == matches(b, a, t)
