"""Off-chain membership with KYC review and login sessions.

Only digests of KYC evidence are kept. Wallet ownership claims live in the
private store here and are never written to the ledger.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import secrets
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import BadCredentials, DuplicateId, InvalidSession, MemberNotFull, NotAuthorized

MemberId = str

DEFAULT_SESSION_TTL = 24 * 3600


class DocKind(str, enum.Enum):
    PASSPORT = "passport"
    GOV_ID = "gov_id"
    DRIVER_LICENSE = "driver_license"
    SSN = "ssn"
    OTHER = "other"


class KycStatus(str, enum.Enum):
    SUBMITTED = "submitted"
    APPROVED = "approved"
    REJECTED = "rejected"


class MemberStatus(str, enum.Enum):
    PROVISIONAL = "provisional"
    FULL = "full"
    SUSPENDED = "suspended"


@dataclass
class KycRecord:
    member: MemberId
    doc_kind: DocKind
    doc_digest: str
    status: KycStatus = KycStatus.SUBMITTED
    submitted_at: int = 0
    reviewed_at: Optional[int] = None


@dataclass(frozen=True)
class Session:
    token: str = field(repr=False)
    member: MemberId
    expires_at: int


@dataclass
class _Member:
    id: MemberId
    password_digest: str
    email: str
    status: MemberStatus = MemberStatus.PROVISIONAL
    kyc: list = field(default_factory=list)
    wallets: set = field(default_factory=set)


def digest(data: bytes, salt: bytes = b"") -> str:
    return hashlib.sha256(b"artexsim/kyc" + salt + data).hexdigest()


class MemberRegistry:
    """Member table and session issuer for one exchange.

    ``clock`` returns the current simulated time in seconds; the ledger's
    ``now`` is the usual source. ``admin_key`` authorizes KYC review.
    """

    def __init__(self, clock: Callable[[], int], admin_key: str, session_ttl: int = DEFAULT_SESSION_TTL,
                 token_source: Optional[Callable[[], str]] = None):
        self._clock = clock
        self._admin_key = admin_key
        self.session_ttl = session_ttl
        self._members: dict[MemberId, _Member] = {}
        self._sessions: dict[str, Session] = {}
        self._token_source = token_source or (lambda: secrets.token_hex(16))
        self._salt = hashlib.sha256(admin_key.encode()).digest()

    def register(self, member_id: MemberId, password_digest: str, email: str) -> MemberId:
        if member_id in self._members:
            raise DuplicateId(member_id)
        self._members[member_id] = _Member(member_id, password_digest, email)
        return member_id

    def login(self, member_id: MemberId, password_digest: str) -> Session:
        m = self._members.get(member_id)
        if m is None or not hmac.compare_digest(m.password_digest, password_digest):
            raise BadCredentials("unknown id or wrong password")
        token = self._token_source()
        while token in self._sessions:
            token = self._token_source()
        session = Session(token=token, member=member_id, expires_at=self._clock() + self.session_ttl)
        self._sessions[token] = session
        return session

    def authenticate(self, session: Session) -> MemberId:
        live = self._sessions.get(session.token)
        if live is None or live.member != session.member or self._clock() >= live.expires_at:
            raise InvalidSession("session unknown or expired")
        return live.member

    def require_full(self, session: Session) -> MemberId:
        member = self.authenticate(session)
        if self._members[member].status is not MemberStatus.FULL:
            raise MemberNotFull(member)
        return member

    def status(self, member_id: MemberId) -> MemberStatus:
        return self._members[member_id].status

    def is_full(self, member_id: MemberId) -> bool:
        m = self._members.get(member_id)
        return m is not None and m.status is MemberStatus.FULL

    def __contains__(self, member_id: object) -> bool:
        return member_id in self._members

    def submit_kyc(self, session: Session, doc_kind, doc_bytes: bytes) -> KycRecord:
        member = self.authenticate(session)
        record = KycRecord(
            member=member,
            doc_kind=DocKind(doc_kind),
            doc_digest=digest(doc_bytes, self._salt),
            submitted_at=self._clock(),
        )
        self._members[member].kyc.append(record)
        return record

    def review_kyc(self, admin_key: str, record: KycRecord, approve: bool) -> MemberStatus:
        if not hmac.compare_digest(admin_key, self._admin_key):
            raise NotAuthorized("admin credential required")
        if record.status is not KycStatus.SUBMITTED:
            raise ValueError(f"record already {record.status.value}")
        record.status = KycStatus.APPROVED if approve else KycStatus.REJECTED
        record.reviewed_at = self._clock()
        m = self._members[record.member]
        if approve and m.status is MemberStatus.PROVISIONAL:
            m.status = MemberStatus.FULL
        return m.status

    def suspend(self, admin_key: str, member_id: MemberId) -> None:
        if not hmac.compare_digest(admin_key, self._admin_key):
            raise NotAuthorized("admin credential required")
        self._members[member_id].status = MemberStatus.SUSPENDED

    def kyc_records(self, member_id: MemberId) -> list[KycRecord]:
        return list(self._members[member_id].kyc)

    def identity_claim(self, member_id: MemberId) -> str:
        """Salted hash suitable for an on-ledger identity registry entry."""
        approved = [r for r in self._members[member_id].kyc if r.status is KycStatus.APPROVED]
        basis = approved[-1].doc_digest if approved else member_id
        return hashlib.sha256(self._salt + b"claim" + basis.encode()).hexdigest()

    # wallet -> member claims, recorded without cryptographic proof
    def claim_wallet(self, session: Session, address: str) -> None:
        member = self.authenticate(session)
        self._members[member].wallets.add(address)

    def wallets_of(self, member_id: MemberId) -> set:
        return set(self._members[member_id].wallets)

    def owner_of_wallet(self, address: str) -> Optional[MemberId]:
        for m in self._members.values():
            if address in m.wallets:
                return m.id
        return None

    def private_store_blob(self) -> bytes:
        """Serialized private store, for secrecy scans in tests."""
        parts = []
        for m in self._members.values():
            parts.append(f"{m.id}|{m.password_digest}|{m.email}|{m.status.value}")
            for r in m.kyc:
                parts.append(f"{r.doc_kind.value}|{r.doc_digest}|{r.status.value}")
            parts.extend(sorted(m.wallets))
        return "\n".join(parts).encode()
