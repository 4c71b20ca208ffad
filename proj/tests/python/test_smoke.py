# Copyright 2026 The sqfluor Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import pytest

import sqfluor as sq


def test_rates_and_bath():
    bath = sq.bath_from_gain(6.6, 1.0)
    assert bath.n == pytest.approx(3.5709, abs=1e-4)
    assert bath.m == pytest.approx(4.0401, abs=1e-4)
    r = sq.rates(bath.with_phi(0.0), sq.AtomParams(rabi=0.0))
    assert r.g_plus == pytest.approx(bath.n + bath.m + 0.5)
    assert r.g_n == pytest.approx(2 * bath.n + 1)


def test_unphysical_bath_raises():
    with pytest.raises(ValueError):
        sq.SqueezedBath(0.1, 1.0, 0.0)


def test_mollow_triplet_and_oracle():
    bath = sq.SqueezedBath(0.0, 0.0, 0.0)
    atom = sq.AtomParams(rabi=10.0)
    grid = sq.uniform_grid(-20.0, 20.0, 401)
    analytic = sq.fluorescence_spectrum(bath, atom, grid)
    numeric = sq.oracle_spectrum(bath, atom, grid)
    assert sq.relative_linf(numeric, analytic) < 1e-3
    centre = analytic[200]
    side = max(analytic[300:])
    assert centre / side == pytest.approx(3.0, rel=0.02)


def test_no_drive_round_trip():
    bath = sq.bath_from_gain(3.0, 0.6).with_phi(math.pi / 2)
    atom = sq.AtomParams(eta_c=0.81)
    grid = sq.uniform_grid(-10.0, 10.0, 801)
    trace = sq.synthesize("no-drive", bath, atom, grid, noise=0.0, seed=1, offset=1.0)
    fit = sq.fit_no_drive(trace, atom)
    est = fit.estimates()
    assert fit.converged
    assert est["M-N"][0] == pytest.approx(bath.m - bath.n, rel=1e-3)


def test_trace_text_round_trip(tmp_path):
    trace = sq.SpectrumTrace([-1.0, 0.0, 1.0], [0.1, 0.3, 0.1])
    path = tmp_path / "t.txt"
    sq.write_trace(trace, path)
    assert sq.read_trace(path) == trace
    assert sq.parse_trace(trace.to_text()) == trace


def test_malformed_trace_raises():
    with pytest.raises(ValueError):
        sq.parse_trace("# units=gamma\n1 2\n0 3\n")


def test_efficiency_fit():
    gains = [1.0, 2.0, 4.0]
    truth = [0.55 * (sq.bath_from_gain(g).m - sq.bath_from_gain(g).n) for g in gains]
    fit = sq.fit_efficiency(gains, truth)
    assert fit.value("eta") == pytest.approx(0.55, rel=1e-6)
