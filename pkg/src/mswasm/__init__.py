"""Memory-safe WebAssembly toolkit.

Modules, handles and segments with full spatial/temporal checking: a
text frontend, validator, small-step interpreter, linker, isolation
lab, and a translator to bounds-checked C.
"""

from .ast import (
    F32,
    F64,
    HANDLE,
    HANDLE_WIDTH,
    I32,
    I64,
    FuncType,
    HandleValue,
    Instr,
    Module,
    NULL_HANDLE,
    Value,
    ValueType,
    instruction_signature,
)
from .interp import (
    Config,
    DEFAULT_FUEL,
    FuelExhausted,
    Outcome,
    Stuck,
    Trapped,
    Values,
    invoke,
    invoke_with_trace,
    step,
)
from .link import (
    HostFunction,
    Instance,
    LinkError,
    StartFailure,
    StoreView,
    instantiate,
    link_chain,
)
from .store import (
    MSWasmTrap,
    ResourceLimitError,
    Store,
    StoreLimits,
    Trap,
    TrapKind,
    handle_add,
    handle_setbounds,
)
from .text import ParseError, parse_module, parse_script, pretty
from .validate import (
    TypedModule,
    TypeErrorRecord,
    ValidationError,
    check_body,
    validate_module,
)
from .generator import generate_module, generate_well_typed

__version__ = "0.1.0"
