"""Hand-recorded field trials used by the replay harness.

Each row is (telemetry payload, operator ground-truth decision).  Payloads
follow the sensor string format: humidity, temperature, soil moisture,
is_raining — rows that carry a fifth field include the decision inline.
"""

REPLAY_TRIALS: tuple[tuple[str, int], ...] = (
    ("78,9,485,1", 0),
    ("58,10,447,1", 0),
    ("35,11,748,0", 1),
    ("35,18,775,0,1", 1),
    ("24,29,898,0,1", 1),
    ("35,22,852,0,1", 1),
    ("38,35,837,0,1", 1),
    ("45,31,565,1,0", 0),
    ("64,38,564,1,0", 0),
    ("55,40,556,1,0", 0),
    ("66,32,411,1,0", 0),
    ("51,35,552,1,0", 0),
    ("65,20,488,1,0", 0),
    ("30,30,838,0,1", 1),
    ("35,11,748,0,1", 1),
    ("39,14,682,0,0", 0),
    ("31,13,628,0,0", 0),
    ("24,14,694,0,1", 1),
    ("31,19,796,0,1", 1),
    ("70,14,415,1,0", 0),
    ("69,20,536,1,0", 0),
    ("60,19,506,1,0", 0),
    ("60,14,522,1,0", 0),
    ("72,9,455,1,0", 0),
    ("55,10,427,1,0", 0),
    ("52,10,536,1,0", 0),
    ("71,12,482,1,0", 0),
    ("64,13,583,1,0", 0),
    ("53,9,561,1,0", 0),
    ("50,9,440,1,0", 0),
)
