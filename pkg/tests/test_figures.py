"""Tests for figure data export"""

import csv

import numpy as np
import pytest

from robust_beliefs import figures
from robust_beliefs.binary_game import solve_structural
from robust_beliefs.figures import figure_panels, render_csv, reproduce_figure


def read_rows(path):
    with open(path, newline='') as handle:
        return list(csv.DictReader(handle))


class TestRenderCsv:

    def test_layout(self):
        text = render_csv(['n', 'x', 'note'], [(1, 0.1, None), (2, np.float64(1 / 3), 'ok')])
        assert text == f"n,x,note\n1,0.1,\n2,{1 / 3!r},ok\n"

    def test_non_finite(self):
        assert render_csv(['x'], [(float('inf'),)]) == "x\ninf\n"


class TestFig1:

    def test_envelope_minimum(self):
        header, rows = figure_panels('fig1')['envelope']()['fig1_envelope.csv']
        assert header[-1] == 'envelope'
        envelope = np.array([row[3] for row in rows])
        best = int(np.argmin(envelope))
        assert rows[best][0] == pytest.approx(0.75, abs=1e-12)
        assert envelope[best] == pytest.approx(0.0625, abs=1e-12)

    def test_curves_cross(self):
        _, rows = figure_panels('fig1')['envelope']()['fig1_envelope.csv']
        assert rows[0][1] < rows[0][2]
        assert rows[-1][1] > rows[-1][2]


class TestReproduce:

    def test_failed_panel_recorded(self, tmp_path, monkeypatch):
        def broken():
            raise RuntimeError("panel exploded")

        monkeypatch.setattr(figures, '_fig1', broken)
        output = reproduce_figure('fig1', str(tmp_path))
        assert output.files == []
        assert output.failures == [{'panel': 'envelope', 'error': 'RuntimeError', 'message': 'panel exploded'}]
        assert list(tmp_path.iterdir()) == []

    def test_unknown_figure(self, tmp_path):
        with pytest.raises(ValueError):
            reproduce_figure('fig9', str(tmp_path))

    @pytest.mark.slow
    def test_fig2_two_equal_peaks(self, tmp_path):
        output = reproduce_figure('fig2', str(tmp_path))
        assert output.failures == []
        assert output.files == ['fig2_n3.csv', 'fig2_n4.csv', 'fig2_n5.csv']

        value = solve_structural(3).value
        regrets = [float(row['regret']) for row in read_rows(tmp_path / 'fig2_n3.csv')]
        assert regrets[0] == pytest.approx(value, abs=1e-6)
        assert max(regrets) <= value + 1e-6
