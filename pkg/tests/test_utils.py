"""Tests for shared helpers"""

import json
import math
import time
from dataclasses import dataclass

import numpy as np
import pytest

from robust_beliefs.errors import NoBracket
from robust_beliefs.utils import (
    atomic_write_text,
    bisect_root,
    format_float,
    format_time_duration,
    local_maxima,
    parallel_map,
    to_jsonable,
)


class TestBisectRoot:

    def test_finds_root(self):
        assert bisect_root(lambda x: x * x - 2.0, 0.0, 2.0) == pytest.approx(math.sqrt(2.0), abs=1e-14)

    def test_endpoint_root(self):
        assert bisect_root(lambda x: x - 1.0, 1.0, 3.0) == 1.0

    def test_no_bracket(self):
        with pytest.raises(NoBracket, match="widget"):
            bisect_root(lambda x: x * x + 1.0, -1.0, 1.0, label='widget')


class TestLocalMaxima:

    def test_interior_peak(self):
        assert local_maxima([1.0, 3.0, 2.0]) == [1]

    def test_endpoints(self):
        assert local_maxima([3.0, 2.0, 1.0]) == [0]
        assert local_maxima([1.0, 2.0, 3.0]) == [2]
        assert local_maxima([2.0, 1.0, 2.0]) == [0, 2]

    def test_flat_curve(self):
        assert local_maxima([0.5, 0.5, 0.5]) == []

    def test_plateau_counted_once(self):
        assert local_maxima([1.0, 2.0, 2.0, 2.0, 1.0]) == [1]

    def test_rounding_noise_ignored(self):
        assert local_maxima([0.0, 0.01, 0.01 + 1e-16, 0.01, 0.0]) == [1]


class TestParallelMap:

    def test_preserves_order(self):
        def slow_square(x):
            time.sleep(0.001 * (5 - x))
            return x * x

        assert parallel_map(slow_square, range(5), max_workers=4) == [0, 1, 4, 9, 16]

    def test_serial_fallback(self):
        assert parallel_map(str, [1, 2], max_workers=1) == ['1', '2']

    def test_empty(self):
        assert parallel_map(str, [], max_workers=3) == []


class TestSerialization:

    def test_format_float(self):
        assert format_float(0.1) == '0.1'
        assert format_float(np.float64(1 / 3)) == repr(1 / 3)
        assert format_float(math.inf) == 'inf'
        assert format_float(-math.inf) == '-inf'
        assert format_float(math.nan) == 'nan'

    def test_to_jsonable(self):
        @dataclass
        class Point:
            x: float
            tags: tuple

        data = {
            'array': np.array([1.0, np.inf]),
            'count': np.int64(3),
            'flag': np.bool_(True),
            'point': Point(x=np.float32(0.5), tags=('a', 'b')),
            1: -math.inf,
        }
        converted = to_jsonable(data)
        assert converted == {
            'array': [1.0, 'inf'],
            'count': 3,
            'flag': True,
            'point': {'x': 0.5, 'tags': ['a', 'b']},
            '1': '-inf',
        }
        json.dumps(converted, allow_nan=False)

    def test_prefers_to_dict(self):
        class Report:
            def to_dict(self):
                return {'value': np.float64(0.25)}

        assert to_jsonable([Report()]) == [{'value': 0.25}]


class TestAtomicWrite:

    def test_lf_newlines(self, tmp_path):
        path = tmp_path / 'nested' / 'out.csv'
        atomic_write_text(str(path), 'a,b\n1,2\n')
        assert path.read_bytes() == b'a,b\n1,2\n'
        assert [p.name for p in path.parent.iterdir()] == ['out.csv']

    def test_overwrites(self, tmp_path):
        path = tmp_path / 'out.json'
        atomic_write_text(str(path), 'old')
        atomic_write_text(str(path), 'new')
        assert path.read_text() == 'new'


class TestFormatTimeDuration:

    @pytest.mark.parametrize("seconds, expected", [
        (0.35, '350ms'), (0.9994, '999ms'), (1.0, '1.0s'), (12.44, '12.4s'), (60.0, '1m 0s'), (125.7, '2m 5s'), (3725.0, '62m 5s'),
    ])
    def test_format(self, seconds, expected):
        assert format_time_duration(seconds) == expected
