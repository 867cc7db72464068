"""Tests for the synthetic data generators."""

from datetime import timedelta

import numpy as np
import pytest

from depotcharge.errors import GenerationInfeasibleError
from depotcharge.matching import match_week, to_jobs
from depotcharge.model import Instance, check_feasible
from depotcharge.synth import (
    TimetableProfile,
    random_baseload,
    sinusoid_emissions,
    synth_timetable,
    week_horizon,
)

from helpers import WEEK_START

WEEK = week_horizon(WEEK_START)


class TestWeekHorizon:
    def test_covers_seven_days_of_quarter_hours(self):
        assert WEEK.interval_count == 672
        assert WEEK.interval_hours == 0.25
        assert WEEK.end == WEEK_START + timedelta(days=7)

    def test_rejects_interval_not_dividing_a_day(self):
        with pytest.raises(ValueError):
            week_horizon(WEEK_START, interval_hours=0.7)


class TestRandomBaseload:
    def test_default_range_average_near_220_kw(self):
        baseload = random_baseload(WEEK, seed=0)
        mean_kw = baseload.kwh.mean() / WEEK.interval_hours
        assert 200.0 <= mean_kw <= 240.0

    def test_values_stay_inside_the_power_range(self):
        baseload = random_baseload(WEEK, seed=1)
        kw = baseload.kwh / WEEK.interval_hours
        assert kw.min() >= 40.0 and kw.max() <= 400.0

    def test_degenerate_range_is_near_constant(self):
        baseload = random_baseload(WEEK, low_kw=399.9, high_kw=400.0, seed=2)
        kw = baseload.kwh / WEEK.interval_hours
        assert kw.max() - kw.min() <= 0.1

    def test_same_seed_reproduces_bitwise(self):
        a = random_baseload(WEEK, seed=7)
        b = random_baseload(WEEK, seed=7)
        np.testing.assert_array_equal(a.kwh, b.kwh)

    def test_different_seeds_differ(self):
        a = random_baseload(WEEK, seed=7)
        b = random_baseload(WEEK, seed=8)
        assert not np.array_equal(a.kwh, b.kwh)

    def test_rejects_bad_ranges(self):
        with pytest.raises(ValueError):
            random_baseload(WEEK, low_kw=400.0, high_kw=400.0)
        with pytest.raises(ValueError):
            random_baseload(WEEK, low_kw=-1.0, high_kw=10.0)


class TestSinusoidEmissions:
    def test_peaks_at_midnight_and_dips_at_noon(self):
        series = sinusoid_emissions(WEEK)
        day = series.kg_per_kwh[:96]
        assert int(np.argmax(day)) in (0, 95)
        assert int(np.argmin(day)) in (47, 48)
        assert day[0] == pytest.approx(450.0, abs=1.0)
        assert day[48] == pytest.approx(150.0, abs=1.0)

    def test_mean_level(self):
        series = sinusoid_emissions(WEEK)
        assert series.kg_per_kwh.mean() == pytest.approx(300.0, abs=5.0)

    def test_values_land_on_the_cost_grid(self):
        series = sinusoid_emissions(WEEK)
        scaled = series.kg_per_kwh * 1e6
        np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-6)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            sinusoid_emissions(WEEK, mean_factor=0.0)
        with pytest.raises(ValueError):
            sinusoid_emissions(WEEK, amplitude_factor=400.0)


class TestTimetableProfile:
    def test_default_counts_follow_the_weekly_shape(self):
        profile = TimetableProfile()
        assert profile.lines_per_day == (33, 33, 33, 33, 33, 22, 23)

    def test_rejects_unequal_weekday_counts_when_identical(self):
        with pytest.raises(ValueError):
            TimetableProfile(lines_per_day=(33, 32, 33, 33, 33, 22, 23))

    def test_rejects_wrong_count_length(self):
        with pytest.raises(ValueError):
            TimetableProfile(lines_per_day=(33, 33))

    def test_rejects_inverted_soc_range(self):
        with pytest.raises(ValueError):
            TimetableProfile(soc_fraction=(0.7, 0.2))

    def test_rejects_start_window_overlapping_ends(self):
        with pytest.raises(ValueError):
            TimetableProfile(start_window_hours=(5.0, 16.0))


class TestSynthTimetable:
    def test_default_per_day_counts(self):
        timetable = synth_timetable(seed=0)
        assert timetable.lines_per_day() == (33, 33, 33, 33, 33, 22, 23)
        assert len(timetable) == 210

    def test_monday_through_thursday_identical(self):
        timetable = synth_timetable(seed=1)
        by_day = {}
        for line in timetable.lines:
            by_day.setdefault(line.day, []).append(line)
        monday = by_day[0]
        for day in (1, 2, 3):
            rows = by_day[day]
            assert len(rows) == len(monday)
            for a, b in zip(monday, rows):
                assert b.line_id == a.line_id
                assert b.start - a.start == timedelta(days=day)
                assert b.end - a.end == timedelta(days=day)
                assert b.bus_type is a.bus_type
                assert b.soc_after_kwh == a.soc_after_kwh

    def test_same_seed_reproduces_the_roster(self):
        assert synth_timetable(seed=5) == synth_timetable(seed=5)
        assert synth_timetable(seed=5) != synth_timetable(seed=6)

    def test_times_snap_to_the_quarter_hour_grid(self):
        timetable = synth_timetable(seed=2)
        for line in timetable.lines:
            for when in (line.start, line.end):
                assert (when.minute % 15 == 0) and when.second == 0

    def test_clock_ranges(self):
        timetable = synth_timetable(seed=3)
        for line in timetable.lines:
            anchor = timetable.week_start + timedelta(days=line.day)
            start_h = (line.start - anchor).total_seconds() / 3600.0
            end_h = (line.end - anchor).total_seconds() / 3600.0
            assert 5.0 <= start_h <= 9.0
            assert 16.0 <= end_h <= (18.0 if line.day == 6 else 24.0)

    def test_soc_stays_in_the_profile_band(self):
        timetable = synth_timetable(seed=4)
        for line in timetable.lines:
            capacity = line.bus_type.capacity_kwh
            # The watt-hour ceil may add up to 1 Wh above the raw draw.
            assert 0.20 * capacity - 1e-9 <= line.soc_after_kwh <= 0.70 * capacity + 0.001

    def test_twenty_seeds_yield_feasible_weeks(self):
        for seed in range(20):
            timetable = synth_timetable(seed=seed)
            jobs = to_jobs(match_week(timetable.lines, WEEK), WEEK)
            assert jobs
            instance = Instance(horizon=WEEK, jobs=jobs)
            assert check_feasible(instance).feasible

    def test_full_batteries_give_zero_energy_jobs(self):
        profile = TimetableProfile(soc_fraction=(1.0, 1.0))
        timetable = synth_timetable(seed=0, profile=profile)
        jobs = to_jobs(match_week(timetable.lines, WEEK), WEEK)
        assert all(job.energy_kwh == 0.0 for job in jobs)

    def test_late_last_day_lines_are_rejected(self):
        profile = TimetableProfile(
            lines_per_day=(1, 1, 1, 1, 1, 1, 5),
            large_fraction=1.0,
            end_hours=(23.0, 23.5, 23.75),
            last_day_end_cap_hours=23.75,
        )
        with pytest.raises(GenerationInfeasibleError):
            synth_timetable(seed=0, profile=profile)
