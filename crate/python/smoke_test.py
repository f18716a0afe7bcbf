"""Smoke test for the uwbtr Python bindings.

Run after `cargo build -p uwbtr-python --release`:

    python3 python/smoke_test.py
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_uwbtr():
    try:
        import uwbtr

        return uwbtr
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libuwbtr.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("uwbtr", str(lib))
            spec = importlib.util.spec_from_loader("uwbtr", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            sys.modules["uwbtr"] = module
            return module
    sys.exit("uwbtr not importable and no built library under target/")


def q(x):
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def main():
    uw = load_uwbtr()
    print("uwbtr", uw.__version__)

    ch = uw.Channel.cm1(1e9, 50.0, 1)
    taps = np.array(ch.draw(5))
    assert ch.tap_count == 51 and taps.size == 51
    assert abs(taps @ taps - 1.0) < 1e-12
    assert np.array_equal(taps, ch.draw(5))
    print("channel: 51 unit-energy taps, reproducible")

    seq = uw.gen_mseq(5)
    acf = np.array(seq.periodic_acf())
    assert len(seq) == 31 and acf[0] == 31.0 and np.all(acf[1:] == -1.0)
    print("m-sequence: periodic ACF 31 / -1")

    sys_dl = uw.System(chips=64, users=1, channel_chips=2)
    c = [0.8, 0.6, 0.0]
    y = uw.receive_dl_training(seq, c, sys_dl, 1)
    est, var = uw.dl_estimate(y, seq, sys_dl)
    assert var == 0.0 and np.max(np.abs(np.array(est) - c)) <= 1.5 / 31
    print("dl estimate at zero noise:", np.round(est, 4))

    awgn = uw.System(chips=16, users=1, channel_chips=0)
    for scheme in ("tr", "ar"):
        p = uw.run_ber(awgn, uw.Channel.delta(), [0.0, 4.0], 200_000, scheme, 3, early_stop=False)
        for row in p:
            want = q(math.sqrt(10 ** (row["snr_db"] / 10)))
            assert abs(row["pe"] - want) <= 5 * row["stderr"], (scheme, row, want)
    print("awgn: Pe matches Q(sqrt(snr)) for tr and ar")

    sys1 = uw.System(chips=64, users=1, channel_chips=5, bandwidth_hz=1e9)
    passed, rows = uw.equivalence_test(sys1, uw.Channel.cm1(1e9, 5.0, 1), [0.0, 6.0], 20_000, 9)
    assert passed, rows
    print("single-user equivalence: pass")

    sys2 = uw.System(chips=64, users=2, channel_chips=5)
    h = uw.coupling_histogram(sys2, uw.Channel.cm1(1e9, 5.0, 1), "tr", 0.0, 20_000, 4)
    assert abs(h["self_mean"] - 1.0) < 1e-12
    assert abs(h["zero_mass"] - (1 - 11 / 64)) < 0.02
    print("tr couplings: zero mass %.4f, cross kurtosis %.2f" % (h["zero_mass"], h["cross_kurtosis"]))

    for snr_db in (0.0, 10.0):
        snr = 10 ** (snr_db / 10)
        r = uw.mutual_information([1.0] * 1000, [], 1.0, 1.0 / snr, 0.0, 0)
        # Gaussian inputs through a unit scalar channel
        assert abs(r["mi"] - 0.5 * math.log1p(snr)) < 1e-4, r
    print("mutual information: scalar-channel oracle matched")

    with tempfile.TemporaryDirectory() as tmp:
        text = "experiment = ber\nchips = 16\nusers = 2\ndelay_spread_ns = 5\nsnr_db = 0, 10\ntrials = 2000\n"
        rep = uw.run_config(text, tmp, seed=1)
        out = pathlib.Path(rep["files"][0])
        assert out.exists() and out.read_text().startswith("# uwbsim")
    print("run_config: wrote", out.name)

    try:
        uw.System(chips=0, users=1, channel_chips=0)
    except ValueError as e:
        print("invalid system rejected:", e)
    else:
        raise AssertionError("chips=0 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
