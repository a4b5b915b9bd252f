"""
Staff calibration: spotting narrow and shifted raters
=====================================================

Observers drift: some use only a couple of scale points, some run a point
hard or soft against their colleagues. Slicing the log per staff member
yields each rater's indicator histogram, how many distinct points they use,
their mean offset against the leave-one-out cohort on shared workflow items,
and the total-variation distance between their distribution and everyone
else's. Here both pathologies are planted synthetically and recovered.
"""

from skilltrack import calibration_report
from skilltrack.analytics import calibration_table
from skilltrack.synth import CohortConfig, generate, inject_anomaly

# A neutral cohort (no natural strictness spread) with one pinned hard rater.
config = CohortConfig(
    n_students=20, n_staff=8, n_locations=4, n_outcomes=12, n_procedures=6,
    n_questions=0, n_teaching_units=0, items_per_procedure=8, years=1.5,
    teaching_weeks_per_year=40, sessions_per_student_week=1.4,
    mean_observations_per_session=12.0, locations_per_program=4,
    procedures_per_location=3, staff_strictness_spread=0.0,
    initial_ability=2.5, ability_ceiling=4.2, learning_rate=0.5,
    noise_level=0.6, seed=12,
    strictness_overrides=(("st001", -1.0),),   # scores a full point low
)
registry, log = generate(config)

# Additionally, st002 collapses the whole scale onto two points.
log, labels = inject_anomaly(
    log, "narrow-rater", {"staff_ids": ["st002"], "support": [3, 4]}
)

report = calibration_report(log)
print(calibration_table(report))

by_id = {s.staff_id: s for s in report.staff}
hard = by_id["st001"]
narrow = by_id["st002"]
print(f"st001 planted at -1.0, measured offset {hard.mean_offset:+.2f}")
print(f"st002 compressed to {labels[0].detail['support']}, "
      f"distinct points used = {narrow.distinct_points_used}")
print(f"st002 histogram: {narrow.histogram}")
