"""Builders for the modeled cloud: lifecycle sketch, login net, provisioning net.

Three nets of increasing size share one vocabulary of typed tokens:

* ``build_abstract_ts``: a six-place lifecycle sketch whose maximal paths
  enumerate the intended behavior, optionally extended with two tampering
  edges that divert it.
* ``build_login_net``: credential checking against stored accounts with an
  online-user ledger; failed requests retry.
* ``build_cloud_net``: the full provisioning pipeline from login to a
  running VM, organized as two submodules (admission control and
  infrastructure) over the shared places.

All builders are pure functions of a declarative ``CloudConfig``. Request
traffic is added afterwards with ``inject_request``, so one net definition
serves any workload.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .hlpn.exprs import (
    BindVar,
    Cmp,
    Expr,
    MakeRecord,
    MakeRow,
    Concat,
    PartsPattern,
    and_,
    eq,
    field,
    in_place,
    le,
    lit,
    min_of,
    not_,
    not_in_place,
    or_,
    var,
)
from .hlpn.net import (
    Fusion,
    InputArc,
    Marking,
    Net,
    OutputArc,
    Place,
    TimedToken,
    Transition,
)
from .hlpn.values import (
    ColorSet,
    CountSet,
    ListSet,
    TextSet,
    TokenValue,
    count,
    record,
    record_set,
    row,
    row_set,
    text,
)


class InvalidConfig(Exception):
    """Raised when a cloud configuration or request violates an invariant."""


class TypeMismatch(Exception):
    """Raised when an injected token does not fit the target place."""


# ---------------------------------------------------------------------------
# Token vocabulary
# ---------------------------------------------------------------------------

CREDENTIAL_SET = record_set(un=TextSet(), pw=TextSet())
REQUEST_SET = record_set(
    un=TextSet(), cpu=TextSet(), ram=CountSet(), disk=CountSet(), st=CountSet()
)
QUOTA_SET = record_set(un=TextSet(), cpu=TextSet(), ram=CountSet(), disk=CountSet())
SLOT_SET = record_set(loc=TextSet(), dc=TextSet())
ADDRESS_SET = record_set(ip=TextSet(), mac=TextSet())
OWNERSHIP_SET = record_set(un=TextSet(), vms=ListSet(TextSet()))
VM_SET = record_set(
    loc=TextSet(), dc=TextSet(), un=TextSet(), cpu=TextSet(), ram=CountSet(),
    disk=CountSet(), di=TextSet(), ip=TextSet(), mac=TextSet(), tag=TextSet(),
)
SCHEDULED_SET = row_set(REQUEST_SET, SLOT_SET)
CONFIGURED_SET = row_set(REQUEST_SET, SLOT_SET, TextSet(), ADDRESS_SET)
MIGRATION_SET = row_set(VM_SET, SLOT_SET)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Credentials:
    username: str
    password: str

    def token(self) -> TokenValue:
        return record(un=text(self.username), pw=text(self.password))


@dataclass(frozen=True)
class QuotaSpec:
    cpu: str
    ram: int
    disk: int

    def __post_init__(self) -> None:
        if self.ram < 0 or self.disk < 0:
            raise InvalidConfig("quota ram and disk must be non-negative")


@dataclass(frozen=True)
class ServerSpec:
    loc: str
    dc: str
    capacity: int

    def __post_init__(self) -> None:
        if not self.loc or not self.dc:
            raise InvalidConfig("server needs a location and a datacenter")
        if self.capacity < 1:
            raise InvalidConfig(f"server capacity must be >= 1, got {self.capacity}")

    def slot(self) -> TokenValue:
        return record(loc=text(self.loc), dc=text(self.dc))


@dataclass(frozen=True)
class VmRequest:
    username: str
    cpu: str
    ram: int
    disk: int
    wants_storage: bool = False

    def __post_init__(self) -> None:
        if self.ram < 0 or self.disk < 0:
            raise InvalidConfig("request ram and disk must be non-negative")

    def token(self) -> TokenValue:
        return record(
            un=text(self.username),
            cpu=text(self.cpu),
            ram=count(self.ram),
            disk=count(self.disk),
            st=count(1 if self.wants_storage else 0),
        )


@dataclass(frozen=True)
class CloudConfig:
    users: tuple[Credentials, ...]
    quotas: dict[str, QuotaSpec]
    servers: tuple[ServerSpec, ...]
    disk_images: tuple[str, ...]
    mac_pool: tuple[str, ...]
    ip_pool: tuple[str, ...]
    online_users: tuple[str, ...] = ()
    strict_quota: bool = False
    migration: bool = False

    def __post_init__(self) -> None:
        names = [u.username for u in self.users]
        if len(set(names)) != len(names):
            raise InvalidConfig(f"duplicate usernames: {sorted(names)}")
        missing = [n for n in names if n not in self.quotas]
        if missing:
            raise InvalidConfig(f"users without a quota: {missing}")
        unknown = [n for n in self.quotas if n not in names]
        if unknown:
            raise InvalidConfig(f"quotas for unknown users: {unknown}")
        if len(self.mac_pool) != len(self.ip_pool):
            raise InvalidConfig(
                f"mac pool ({len(self.mac_pool)}) and ip pool "
                f"({len(self.ip_pool)}) must pair up one to one"
            )

    _REQUIRED = ("users", "quotas", "servers", "disk_images", "mac_pool", "ip_pool")
    _OPTIONAL = ("online_users", "strict_quota", "migration")

    @classmethod
    def from_json(cls, data: dict) -> "CloudConfig":
        if not isinstance(data, dict):
            raise InvalidConfig(f"config must be an object, got {type(data).__name__}")
        extra = set(data) - set(cls._REQUIRED) - set(cls._OPTIONAL)
        if extra:
            raise InvalidConfig(f"unknown config keys: {sorted(extra)}")
        missing = [k for k in cls._REQUIRED if k not in data]
        if missing:
            raise InvalidConfig(f"missing config keys: {missing}")
        try:
            users = tuple(
                Credentials(u["username"], u["password"]) for u in data["users"]
            )
            quotas = {
                name: QuotaSpec(q["cpu"], q["ram"], q["disk"])
                for name, q in data["quotas"].items()
            }
            servers = tuple(
                ServerSpec(s["loc"], s["dc"], s["capacity"]) for s in data["servers"]
            )
        except (KeyError, TypeError) as exc:
            raise InvalidConfig(f"malformed config entry: {exc}") from exc
        return cls(
            users=users,
            quotas=quotas,
            servers=servers,
            disk_images=tuple(data["disk_images"]),
            mac_pool=tuple(data["mac_pool"]),
            ip_pool=tuple(data["ip_pool"]),
            online_users=tuple(data.get("online_users", ())),
            strict_quota=bool(data.get("strict_quota", False)),
            migration=bool(data.get("migration", False)),
        )

    def to_json(self) -> dict:
        return {
            "users": [
                {"username": u.username, "password": u.password} for u in self.users
            ],
            "quotas": {
                name: {"cpu": q.cpu, "ram": q.ram, "disk": q.disk}
                for name, q in sorted(self.quotas.items())
            },
            "servers": [
                {"loc": s.loc, "dc": s.dc, "capacity": s.capacity}
                for s in self.servers
            ],
            "disk_images": list(self.disk_images),
            "mac_pool": list(self.mac_pool),
            "ip_pool": list(self.ip_pool),
            "online_users": list(self.online_users),
            "strict_quota": self.strict_quota,
            "migration": self.migration,
        }


def load_cloud_config(path) -> CloudConfig:
    import json

    with open(path, encoding="utf-8") as handle:
        return CloudConfig.from_json(json.load(handle))


# ---------------------------------------------------------------------------
# Abstract lifecycle sketch
# ---------------------------------------------------------------------------

_LIFECYCLE_EDGES = (
    ("Start", "s", "A"),
    ("A", "c", "Final"),
    ("A", "i", "B"),
    ("B", "c", "Final"),
    ("B", "i", "C"),
    ("C", "c", "Final"),
    ("C", "i", "Invalid"),
)
_TAMPERING_EDGES = (
    ("B", "t", "Invalid"),
    ("C", "t", "Final"),
)


def build_abstract_ts(with_malicious_inputs: bool = False) -> Net:
    """Lifecycle sketch: a single control token walks labeled stage edges."""
    net = Net("lifecycle")
    for pid in ("Start", "A", "B", "C", "Final", "Invalid"):
        net.add_place(Place(pid, TextSet(), label=pid))
    edges = _LIFECYCLE_EDGES + (_TAMPERING_EDGES if with_malicious_inputs else ())
    for src, sym, dst in edges:
        net.add_transition(
            Transition(f"{src}-{sym}-{dst}", delay=1, label=sym),
            inputs=[InputArc(src, BindVar("x"))],
            outputs=[OutputArc(dst, var("x"))],
        )
    net.initial = Marking({"Start": [TimedToken(0, text("run"))]})
    return net


# ---------------------------------------------------------------------------
# Login net
# ---------------------------------------------------------------------------


def build_login_net(config: CloudConfig) -> Net:
    """Credential check with an online-user ledger and a retry loop."""
    net = Net("login")
    net.add_place(Place("Log_Reqs", CREDENTIAL_SET, label="pending logins"))
    net.add_place(Place("Usr_Accns", CREDENTIAL_SET, label="stored accounts"))
    net.add_place(Place("On_Usrs", TextSet(), label="online usernames"))

    # Success: request equals a stored account and the user is not online yet.
    accept = and_(
        eq(var("U"), var("C")),
        not_in_place(field(var("U"), "un"), "On_Usrs"),
    )
    net.add_transition(
        Transition("Auth_S", guard=accept, delay=1, label="login accepted"),
        inputs=[InputArc("Log_Reqs", BindVar("U")),
                InputArc("Usr_Accns", BindVar("C"))],
        outputs=[OutputArc("On_Usrs", field(var("U"), "un")),
                 OutputArc("Usr_Accns", var("C"))],
    )
    net.add_transition(
        Transition("Auth_F", guard=not_(accept), delay=1, label="login refused"),
        inputs=[InputArc("Log_Reqs", BindVar("U")),
                InputArc("Usr_Accns", BindVar("C"))],
        outputs=[OutputArc("Log_Reqs", var("U")),
                 OutputArc("Usr_Accns", var("C"))],
    )
    net.initial = Marking(
        {
            "Usr_Accns": [TimedToken(0, u.token()) for u in config.users],
            "On_Usrs": [TimedToken(0, text(n)) for n in config.online_users],
        }
    )
    return net


# ---------------------------------------------------------------------------
# Provisioning net
# ---------------------------------------------------------------------------

_PLACE_TYPES: dict[str, tuple[ColorSet, str]] = {
    "UI": (CREDENTIAL_SET, "incoming logins"),
    "AS": (CREDENTIAL_SET, "stored accounts"),
    "CA": (TextSet(), "authenticated usernames"),
    "INT": (REQUEST_SET, "incoming VM requests"),
    "VRQ": (REQUEST_SET, "admitted VM requests"),
    "REJ": (REQUEST_SET, "rejected VM requests"),
    "UQ": (QUOTA_SET, "per-user quotas"),
    "SL": (REQUEST_SET, "requests awaiting a host"),
    "AR": (SLOT_SET, "free capacity slots"),
    "HS": (SCHEDULED_SET, "request paired with host"),
    "DI": (TextSet(), "disk images"),
    "NIC": (TextSet(), "virtual nic mac addresses"),
    "NET": (ADDRESS_SET, "dhcp ip/mac pairs"),
    "HYP": (CONFIGURED_SET, "fully configured requests"),
    "DB": (OWNERSHIP_SET, "per-user VM ownership"),
    "VM": (VM_SET, "running VMs"),
    "MIG": (MIGRATION_SET, "migrations in flight"),
}


def cloud_place_ids() -> frozenset[str]:
    """Every place id a provisioning net can contain, any configuration."""
    return frozenset(_PLACE_TYPES)


def _quota_capacity_clauses(strict: bool) -> list[Expr]:
    fit = eq if strict else le
    return [
        eq(field(var("R"), "cpu"), field(var("Q"), "cpu")),
        fit(field(var("R"), "ram"), field(var("Q"), "ram")),
        fit(field(var("R"), "disk"), field(var("Q"), "disk")),
    ]


def _vm_record(tag: str) -> MakeRecord:
    return MakeRecord(
        (
            ("loc", field(var("SRV"), "loc")),
            ("dc", field(var("SRV"), "dc")),
            ("un", field(var("REQ"), "un")),
            ("cpu", field(var("REQ"), "cpu")),
            ("ram", field(var("REQ"), "ram")),
            ("disk", field(var("REQ"), "disk")),
            ("di", var("IM")),
            ("ip", field(var("DH"), "ip")),
            ("mac", field(var("DH"), "mac")),
            ("tag", lit(text(tag))),
        )
    )


def _control_module(config: CloudConfig) -> Net:
    """Admission control: authentication, access grant, quota gate, scheduling."""
    sub = Net("control")
    for pid in ("UI", "AS", "CA", "INT", "VRQ", "REJ", "UQ", "SL", "AR", "HS"):
        colorset, label = _PLACE_TYPES[pid]
        sub.add_place(Place(pid, colorset, label=label))

    sub.add_transition(
        Transition("Auth_S", guard=in_place(var("U"), "AS"), delay=1,
                   label="login accepted"),
        inputs=[InputArc("UI", BindVar("U"))],
        outputs=[OutputArc("CA", field(var("U"), "un"))],
    )
    sub.add_transition(
        Transition("Auth_F", guard=not_in_place(var("U"), "AS"), delay=1,
                   label="login refused"),
        inputs=[InputArc("UI", BindVar("U"))],
        outputs=[OutputArc("UI", var("U"))],
    )
    sub.add_transition(
        Transition("Grant_Access", delay=1, label="request admitted",
                   guard=eq(field(var("R"), "un"), var("A"))),
        inputs=[InputArc("INT", BindVar("R")), InputArc("CA", BindVar("A"))],
        outputs=[OutputArc("VRQ", var("R")), OutputArc("CA", var("A"))],
    )

    same_user = eq(field(var("R"), "un"), field(var("Q"), "un"))
    capacity = _quota_capacity_clauses(config.strict_quota)
    sub.add_transition(
        Transition("VM_S", guard=and_(same_user, *capacity), delay=1,
                   label="request within quota"),
        inputs=[InputArc("VRQ", BindVar("R")), InputArc("UQ", BindVar("Q"))],
        outputs=[OutputArc("SL", var("R")), OutputArc("UQ", var("Q"))],
    )
    sub.add_transition(
        Transition("VM_F", guard=and_(same_user, not_(and_(*capacity))), delay=1,
                   label="request exceeds quota"),
        inputs=[InputArc("VRQ", BindVar("R")), InputArc("UQ", BindVar("Q"))],
        outputs=[OutputArc("REJ", var("R")), OutputArc("UQ", var("Q"))],
    )
    # First free slot in canonical (dc, loc) order gets the request.
    sub.add_transition(
        Transition("Schedule", guard=eq(var("S"), min_of("AR")), delay=1,
                   label="host selected"),
        inputs=[InputArc("SL", BindVar("R")), InputArc("AR", BindVar("S"))],
        outputs=[OutputArc("HS", MakeRow((var("R"), var("S"))))],
    )
    return sub


def _infrastructure_module(config: CloudConfig) -> Net:
    """Infrastructure: final configuration, VM start, optional migration."""
    sub = Net("infrastructure")
    places = ["HS", "DI", "NIC", "NET", "HYP", "DB", "VM"]
    if config.migration:
        places += ["AR", "MIG"]
    for pid in places:
        colorset, label = _PLACE_TYPES[pid]
        sub.add_place(Place(pid, colorset, label=label))

    # Leases pop off the address pool head; the nic must carry the same mac.
    sub.add_transition(
        Transition(
            "Final_confs",
            guard=and_(
                eq(var("DH"), min_of("NET")),
                eq(field(var("DH"), "mac"), var("VN")),
            ),
            delay=1,
            label="image and network attached",
        ),
        inputs=[
            InputArc("HS", PartsPattern(("REQ", "SRV"))),
            InputArc("DI", BindVar("IM")),
            InputArc("NIC", BindVar("VN")),
            InputArc("NET", BindVar("DH")),
        ],
        outputs=[
            OutputArc(
                "HYP",
                Concat((MakeRow((var("REQ"), var("SRV"))), var("IM"), var("DH"))),
            )
        ],
    )

    owns = eq(field(var("D"), "un"), field(var("REQ"), "un"))
    ownership = MakeRecord(
        (
            ("un", field(var("D"), "un")),
            ("vms", Concat((field(var("D"), "vms"), field(var("DH"), "ip")))),
        )
    )
    hyp_inputs = [
        InputArc("HYP", PartsPattern(("REQ", "SRV", "IM", "DH"))),
        InputArc("DB", BindVar("D")),
    ]
    sub.add_transition(
        Transition(
            "Start_VM",
            guard=and_(owns, eq(field(var("REQ"), "st"), lit(count(0)))),
            delay=1,
            label="VM started",
        ),
        inputs=hyp_inputs,
        outputs=[OutputArc("VM", _vm_record("VM")), OutputArc("DB", ownership)],
    )
    sub.add_transition(
        Transition(
            "Start_VM_Data",
            guard=and_(owns, eq(field(var("REQ"), "st"), lit(count(1)))),
            delay=1,
            label="VM started with storage",
        ),
        inputs=hyp_inputs,
        outputs=[OutputArc("VM", _vm_record("VM+Data")), OutputArc("DB", ownership)],
    )

    if config.migration:
        elsewhere = or_(
            Cmp("ne", field(var("V"), "loc"), field(var("S"), "loc")),
            Cmp("ne", field(var("V"), "dc"), field(var("S"), "dc")),
        )
        sub.add_transition(
            Transition("Migrate_Start", guard=elsewhere, delay=0,
                       label="migration begins"),
            inputs=[InputArc("VM", BindVar("V")), InputArc("AR", BindVar("S"))],
            outputs=[OutputArc("MIG", MakeRow((var("V"), var("S"))))],
        )
        moved = MakeRecord(
            (
                ("loc", field(var("S"), "loc")),
                ("dc", field(var("S"), "dc")),
            )
            + tuple(
                (name, field(var("V"), name))
                for name in ("un", "cpu", "ram", "disk", "di", "ip", "mac", "tag")
            )
        )
        freed = MakeRecord(
            (("loc", field(var("V"), "loc")), ("dc", field(var("V"), "dc")))
        )
        sub.add_transition(
            Transition("Migrate_End", delay=5, label="migration completes"),
            inputs=[InputArc("MIG", PartsPattern(("V", "S")))],
            outputs=[OutputArc("VM", moved), OutputArc("AR", freed)],
        )
    return sub


def build_cloud_net(config: CloudConfig) -> Net:
    """Hierarchical provisioning net over the full place vocabulary."""
    for name, pool in (
        ("servers", config.servers),
        ("disk_images", config.disk_images),
        ("mac_pool", config.mac_pool),
        ("ip_pool", config.ip_pool),
    ):
        if not pool:
            raise InvalidConfig(f"{name} must be non-empty for VM provisioning")

    net = Net("cloud")
    place_ids = [pid for pid in _PLACE_TYPES if pid != "MIG" or config.migration]
    for pid in place_ids:
        colorset, label = _PLACE_TYPES[pid]
        net.add_place(Place(pid, colorset, label=label))

    control = _control_module(config)
    infrastructure = _infrastructure_module(config)
    net.add_submodule(
        "control", control, [Fusion(pid, "control", pid) for pid in control.places]
    )
    net.add_submodule(
        "infrastructure",
        infrastructure,
        [Fusion(pid, "infrastructure", pid) for pid in infrastructure.places],
    )

    tokens: dict[str, list[TimedToken]] = {
        "AS": [TimedToken(0, u.token()) for u in config.users],
        "CA": [TimedToken(0, text(n)) for n in config.online_users],
        "UQ": [
            TimedToken(
                0,
                record(
                    un=text(name), cpu=text(q.cpu), ram=count(q.ram),
                    disk=count(q.disk),
                ),
            )
            for name, q in sorted(config.quotas.items())
        ],
        "AR": [
            TimedToken(0, s.slot())
            for s in config.servers
            for _ in range(s.capacity)
        ],
        "DI": [TimedToken(0, text(img)) for img in config.disk_images],
        "NIC": [TimedToken(0, text(mac)) for mac in config.mac_pool],
        "NET": [
            TimedToken(0, record(ip=text(ip), mac=text(mac)))
            for ip, mac in zip(config.ip_pool, config.mac_pool)
        ],
        "DB": [
            TimedToken(0, record(un=text(u.username), vms=row()))
            for u in config.users
        ],
    }
    net.initial = Marking(tokens)
    return net


# ---------------------------------------------------------------------------
# Workload injection
# ---------------------------------------------------------------------------


def inject_request(
    net: Net,
    marking: Marking,
    req: Credentials | VmRequest | TokenValue,
    at: int = 0,
    place: str | None = None,
) -> Marking:
    """Add one request token to the marking, typed against its target place.

    Credentials go to the login intake (UI, or Log_Reqs on the login net),
    VM requests to INT. A raw token value needs an explicit place.
    """
    if not isinstance(at, int) or isinstance(at, bool) or at < 0:
        raise TypeMismatch(f"timestamp must be a non-negative integer, got {at!r}")
    if isinstance(req, Credentials):
        token = req.token()
        target = place or ("UI" if "UI" in net.places else "Log_Reqs")
    elif isinstance(req, VmRequest):
        token = req.token()
        target = place or "INT"
    elif isinstance(req, TokenValue):
        if place is None:
            raise TypeMismatch("raw token values need an explicit place")
        token = req
        target = place
    else:
        raise TypeMismatch(f"cannot inject {type(req).__name__}")
    if target not in net.places:
        raise TypeMismatch(f"no place {target!r} in net {net.net_id!r}")
    colorset = net.places[target].colorset
    if not colorset.contains(token):
        raise TypeMismatch(
            f"token {token.canon()} does not fit place {target!r}"
        )
    return marking.with_changes(add=[(target, TimedToken(at, token))])
