"""Secret and access management: hashed API keys with role-based access
control over every endpoint. Plaintext secrets are shown once at issuance
and never persisted.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import re
import secrets
import threading
import time
import uuid
from dataclasses import dataclass

from .errors import Forbidden, Revoked, Unauthenticated

ROLE_CLIENT = "client"
ROLE_OPERATOR = "operator"
ROLE_ADMIN = "admin"
ROLES = (ROLE_CLIENT, ROLE_OPERATOR, ROLE_ADMIN)


@dataclass(frozen=True)
class Principal:
    key_id: str
    role: str
    key_hash: str
    created_at: float
    revoked: bool = False


def _hash_secret(secret: str) -> str:
    return hashlib.sha256(secret.encode("utf-8")).hexdigest()


class KeyStore:
    """API-key table persisted as JSON (hashes only)."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = str(path) if path else None
        self._keys: dict[str, Principal] = {}
        self._lock = threading.Lock()
        if self.path and os.path.exists(self.path):
            self._load()

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            for raw in json.load(fh):
                p = Principal(**raw)
                self._keys[p.key_id] = p

    def _persist_locked(self) -> None:
        if not self.path:
            return
        tmp = self.path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump([vars(p) for p in self._keys.values()], fh, indent=2)
        os.replace(tmp, self.path)

    def bootstrap_admin(self, env_var: str = "FW_BOOTSTRAP_ADMIN_KEY") -> Principal | None:
        """Create the first admin from the environment on an empty store."""
        secret = os.environ.get(env_var)
        with self._lock:
            if self._keys or not secret:
                return None
            principal = Principal(
                key_id="admin-bootstrap",
                role=ROLE_ADMIN,
                key_hash=_hash_secret(secret),
                created_at=time.time(),
            )
            self._keys[principal.key_id] = principal
            self._persist_locked()
            return principal

    def issue_key(self, role: str, issuer: Principal | None = None) -> tuple[str, str]:
        """Mint a key; returns (key_id, plaintext secret shown once)."""
        if issuer is not None and issuer.role != ROLE_ADMIN:
            raise Forbidden("only admins may issue keys")
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        secret = secrets.token_hex(32)
        key_id = f"k-{uuid.uuid4().hex[:12]}"
        principal = Principal(
            key_id=key_id, role=role, key_hash=_hash_secret(secret), created_at=time.time()
        )
        with self._lock:
            self._keys[key_id] = principal
            self._persist_locked()
        return key_id, secret

    def revoke(self, key_id: str, issuer: Principal | None = None) -> None:
        if issuer is not None and issuer.role != ROLE_ADMIN:
            raise Forbidden("only admins may revoke keys")
        with self._lock:
            p = self._keys.get(key_id)
            if p is None:
                raise KeyError(key_id)
            self._keys[key_id] = Principal(
                key_id=p.key_id,
                role=p.role,
                key_hash=p.key_hash,
                created_at=p.created_at,
                revoked=True,
            )
            self._persist_locked()

    def authenticate(self, presented_secret: str | None) -> Principal:
        """Constant-time hash comparison over all stored keys."""
        if not presented_secret:
            raise Unauthenticated("missing API key")
        presented_hash = _hash_secret(presented_secret)
        with self._lock:
            candidates = list(self._keys.values())
        matched: Principal | None = None
        for p in candidates:  # no early exit: scan the whole table
            if hmac.compare_digest(presented_hash, p.key_hash):
                matched = p
        if matched is None:
            raise Unauthenticated("unknown API key")
        if matched.revoked:
            raise Revoked(f"key {matched.key_id} is revoked")
        return matched

    def list_keys(self) -> list[dict]:
        with self._lock:
            return [vars(p) for p in self._keys.values()]


# ---------------------------------------------------------------------------
# Privilege matrix
# ---------------------------------------------------------------------------

# Each row: (method, path regex, roles allowed). First match wins; anything
# that matches no row is denied for every role (fail-closed).
PRIVILEGE_MATRIX: list[tuple[str, re.Pattern[str], frozenset[str]]] = [
    ("POST", re.compile(r"^/v1/guard/"), frozenset(ROLES)),
    ("GET", re.compile(r"^/metrics$"), frozenset({ROLE_OPERATOR, ROLE_ADMIN})),
    ("GET", re.compile(r"^/admin/"), frozenset({ROLE_OPERATOR, ROLE_ADMIN})),
    ("POST", re.compile(r"^/admin/quarantine/[^/]+/resolve$"), frozenset({ROLE_OPERATOR, ROLE_ADMIN})),
    ("POST", re.compile(r"^/admin/feedback$"), frozenset({ROLE_OPERATOR, ROLE_ADMIN})),
    ("PUT", re.compile(r"^/admin/rules$"), frozenset({ROLE_ADMIN})),
    ("POST", re.compile(r"^/admin/rules/reload$"), frozenset({ROLE_ADMIN})),
    ("POST", re.compile(r"^/admin/audit/run$"), frozenset({ROLE_ADMIN})),
    ("POST", re.compile(r"^/admin/keys$"), frozenset({ROLE_ADMIN})),
    ("DELETE", re.compile(r"^/admin/keys/[^/]+$"), frozenset({ROLE_ADMIN})),
]


def authorize(principal: Principal, method: str, path: str) -> None:
    """Raise Forbidden unless the matrix grants this role the endpoint."""
    for row_method, pattern, allowed in PRIVILEGE_MATRIX:
        if method == row_method and pattern.search(path):
            if principal.role in allowed:
                return
            raise Forbidden(f"role {principal.role!r} may not {method} {path}")
    raise Forbidden(f"no privilege rule grants {method} {path}")
