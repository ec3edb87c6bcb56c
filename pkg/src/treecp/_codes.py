# Integer codes shared by both kernel backends. _ckernel.pyx repeats these
# values in a cdef enum; tests/test_backends.py checks they agree.

# tree kinds
GW = 0
GWPLUS = 1
PERIODIC = 2
FIXED = 3

# restriction kinds
R_NONE = 0
R_SUBTREE = 1
R_SUBPLUS = 2
R_BALL = 3
R_PATH = 4

# per-level outcome reasons
RUNNING = 0
EXTINCT = 1
TIMECAP = 2
MASSCAP = 3
FRONTIER = 4
TARGET = 5
REINFECTION = 6
EVENTCAP = 7

REASON_NAMES = {
    RUNNING: "Running",
    EXTINCT: "Extinct",
    TIMECAP: "TimeCap",
    MASSCAP: "MassCap",
    FRONTIER: "FrontierReached",
    TARGET: "TargetHit",
    REINFECTION: "ReinfectionReached",
    EVENTCAP: "EventCap",
}

# results of a single kernel step
EV_EXTINCT = 0
EV_RECOVERY = 1
EV_INFECTION = 2
EV_NOOP = 3
EV_SUPPRESSED = 4
EV_TIMECAP = 5

EVENT_NAMES = {
    EV_EXTINCT: "extinct",
    EV_RECOVERY: "recovery",
    EV_INFECTION: "infection",
    EV_NOOP: "noop",
    EV_SUPPRESSED: "suppressed",
    EV_TIMECAP: "timecap",
}

MIN_CHUNK = 64
MAX_CHUNK = 1 << 16
