"""Central constants table: tolerances, budgets and protocol defaults."""

import math

# --- CONFIGURATION ---
TAU_HERM = 1e-10          # max |X - X^dagger| entrywise
TAU_PSD = 1e-10           # smallest tolerated negative eigenvalue
TAU_UNIT = 1e-10          # unitarity / trace-one / POVM completeness
TAU_NORM = 1e-12          # pure-state normalisation
TAU_TP = 1e-9             # Tr_out Choi = 1 for trace-preserving channels
TAU_UNITARY_CHECK = 1e-8  # unitary inputs to the diamond-distance closed form
TAU_CLAMP = 1e-12         # sqrt arguments within this of 0 are clamped
TAU_DESIGN = 1e-10        # moment-operator agreement for design verification

# --- BUDGETS ---
MAX_DENSE_QUBITS = 12
MAX_CACHED_CLIFFORD_QUBITS = 6
MAX_OPERATOR_ENTRIES = 10**6   # entries of a d^k x d^k moment/projector operator
MAX_SHOTS_PER_RECORD = 10**8
MAX_COUNT_LABELS = 2**16
MAX_ENUMERATED_CLIFFORD_QUBITS = 2

# --- PROTOCOL DEFAULTS ---
DEFAULT_SEED = 1234
SFE_CONSTANT = 160.0
MOM_GROUP_CONSTANT = 8.0
RB_MIN_SAMPLES_PER_POINT = 10
IRB_UNINFORMATIVE_HALFWIDTH = 0.5
EULER_GAMMA = 0.5772156649015329
E_SQUARED = math.e**2

# --- RUNNER ---
MAX_WORKERS = 4
OUTPUT_FOLDER = "results"
RESULT_FILENAME = "result.json"
TIMING_FILENAME = "timing.json"
RECORD_FILENAME = "record.jsonl"
EXCEL_FILENAME = "verify_report.xlsx"
CSV_FLOAT_FORMAT = "%.17g"
