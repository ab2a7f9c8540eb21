"""Back-door paths of the final survey DAG, frozen as node sequences."""

PARKING_PATHS = [
    ('V7', 'V8', 'V13', 'V1', 'Y'),
    ('V7', 'V8', 'V13', 'V5', 'V1', 'Y'),
    ('V7', 'V8', 'V13', 'V5', 'V12', 'V1', 'Y'),
    ('V7', 'V8', 'V13', 'V5', 'V2', 'V1', 'Y'),
    ('V7', 'V8', 'V13', 'V5', 'V2', 'U1', 'V1', 'Y'),
    ('V7', 'V8', 'V1', 'Y'),
    ('V7', 'V8', 'V5', 'V1', 'Y'),
    ('V7', 'V8', 'V5', 'V13', 'V1', 'Y'),
    ('V7', 'V8', 'V5', 'V12', 'V1', 'Y'),
    ('V7', 'V8', 'V5', 'V2', 'V1', 'Y'),
    ('V7', 'V8', 'V5', 'V2', 'U1', 'V1', 'Y'),
    ('V7', 'V8', 'U2', 'Y'),
    ('V7', 'V9', 'V8', 'V13', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V13', 'V5', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V13', 'V5', 'V12', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V13', 'V5', 'V2', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V13', 'V5', 'V2', 'U1', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V5', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V5', 'V13', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V5', 'V12', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V5', 'V2', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'V5', 'V2', 'U1', 'V1', 'Y'),
    ('V7', 'V9', 'V8', 'U2', 'Y'),
]

INCOME_PATHS = [
    ('V1', 'V12', 'V5', 'V8', 'V7', 'Y'),
    ('V1', 'V12', 'V5', 'V8', 'V9', 'V7', 'Y'),
    ('V1', 'V12', 'V5', 'V8', 'U2', 'Y'),
    ('V1', 'V12', 'V5', 'V13', 'V8', 'V7', 'Y'),
    ('V1', 'V12', 'V5', 'V13', 'V8', 'V9', 'V7', 'Y'),
    ('V1', 'V12', 'V5', 'V13', 'V8', 'U2', 'Y'),
    ('V1', 'V12', 'V5', 'V2', 'V7', 'V8', 'U2', 'Y'),
    ('V1', 'V12', 'V5', 'V2', 'V7', 'Y'),
    ('V1', 'V12', 'V5', 'V2', 'V7', 'V9', 'V8', 'U2', 'Y'),
    ('V1', 'V5', 'V8', 'V7', 'Y'),
    ('V1', 'V5', 'V8', 'V9', 'V7', 'Y'),
    ('V1', 'V5', 'V8', 'U2', 'Y'),
    ('V1', 'V5', 'V13', 'V8', 'V7', 'Y'),
    ('V1', 'V5', 'V13', 'V8', 'V9', 'V7', 'Y'),
    ('V1', 'V5', 'V13', 'V8', 'U2', 'Y'),
    ('V1', 'V5', 'V2', 'V7', 'V8', 'U2', 'Y'),
    ('V1', 'V5', 'V2', 'V7', 'Y'),
    ('V1', 'V5', 'V2', 'V7', 'V9', 'V8', 'U2', 'Y'),
    ('V1', 'U1', 'V2', 'V5', 'V8', 'V7', 'Y'),
    ('V1', 'U1', 'V2', 'V5', 'V8', 'V9', 'V7', 'Y'),
    ('V1', 'U1', 'V2', 'V5', 'V8', 'U2', 'Y'),
    ('V1', 'U1', 'V2', 'V5', 'V13', 'V8', 'V7', 'Y'),
    ('V1', 'U1', 'V2', 'V5', 'V13', 'V8', 'V9', 'V7', 'Y'),
    ('V1', 'U1', 'V2', 'V5', 'V13', 'V8', 'U2', 'Y'),
    ('V1', 'U1', 'V2', 'V7', 'V8', 'U2', 'Y'),
    ('V1', 'U1', 'V2', 'V7', 'Y'),
    ('V1', 'U1', 'V2', 'V7', 'V9', 'V8', 'U2', 'Y'),
]
