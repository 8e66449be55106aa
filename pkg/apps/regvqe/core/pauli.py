"""
パウリ和演算子
H = Σ c_i P_i の表現・.psum 形式の読み書き・RFIM インスタンス生成

ラベルの左端の文字が qubit 0 (振幅インデックスの最下位ビット) に対応する。
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ..errors import PauliFormatError, QubitMismatchError

PAULI_CHARS = frozenset("IXYZ")
HEADER_PREFIX = "# qubits:"

# 同梱データ (data/hamiltonians/*.psum)
PROJECT_ROOT = Path(__file__).resolve().parents[3]
HAMILTONIAN_DIR = PROJECT_ROOT / "data" / "hamiltonians"


@dataclass(frozen=True)
class PauliString:
    """固定長のパウリラベル(例: "XIZY")"""

    label: str

    def __post_init__(self):
        if not self.label:
            raise PauliFormatError("empty Pauli label")
        bad = set(self.label) - PAULI_CHARS
        if bad:
            raise PauliFormatError(f"invalid Pauli characters {sorted(bad)} in {self.label!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.label)

    @cached_property
    def x_mask(self) -> int:
        """X または Y が作用するビットのマスク(ビット反転)"""
        return sum(1 << q for q, c in enumerate(self.label) if c in "XY")

    @cached_property
    def z_mask(self) -> int:
        """Z または Y が作用するビットのマスク(符号)"""
        return sum(1 << q for q, c in enumerate(self.label) if c in "ZY")

    @cached_property
    def y_count(self) -> int:
        return self.label.count("Y")

    @property
    def is_diagonal(self) -> bool:
        return self.x_mask == 0

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class WeightedPauliSum:
    """
    重み付きパウリ和

    構築時に正規化する: 同一ラベルは係数を加算して統合し、
    係数 0 の項は除去し、ラベルの辞書順に並べる。
    """

    terms: tuple[tuple[float, PauliString], ...] = field(default=())
    n_qubits: int | None = None

    def __post_init__(self):
        merged: dict[str, float] = {}
        n_qubits = self.n_qubits
        for coeff, pauli in self.terms:
            if not isinstance(pauli, PauliString):
                pauli = PauliString(str(pauli))
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise PauliFormatError(f"non-finite coefficient {coeff} for {pauli.label}")
            if n_qubits is None:
                n_qubits = pauli.n_qubits
            elif pauli.n_qubits != n_qubits:
                raise QubitMismatchError(f"term {pauli.label} has {pauli.n_qubits} qubits, expected {n_qubits}")
            merged[pauli.label] = merged.get(pauli.label, 0.0) + coeff

        if n_qubits is None or n_qubits < 1:
            raise QubitMismatchError("qubit count cannot be inferred from an empty term list")

        canonical = tuple((c, PauliString(label)) for label, c in sorted(merged.items()) if c != 0.0)
        object.__setattr__(self, "terms", canonical)
        object.__setattr__(self, "n_qubits", int(n_qubits))

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    @property
    def labels(self) -> list[str]:
        return [p.label for _, p in self.terms]

    @property
    def is_diagonal(self) -> bool:
        return all(p.is_diagonal for _, p in self.terms)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, str]], n_qubits: int | None = None) -> WeightedPauliSum:
        return cls(tuple((c, PauliString(label)) for c, label in pairs), n_qubits)


@dataclass(frozen=True)
class RfimSpec:
    """
    ランダム磁場イジング鎖の生成パラメータ

    H = -J Σ Z_i Z_{i+1} + Σ h_i Z_i (開境界), h_i ~ U[field_low, field_high]。
    既定値は n=12 で Σ E|c_i| = 11·J + 12·h_max/2 ≈ 15.219 (J=1.1, h_max≈0.5198)。
    """

    n_qubits: int = 12
    coupling_j: float = 1.1
    field_low: float = -0.5198333333333334
    field_high: float = 0.5198333333333334
    rng_seed: int = 7

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError(f"RFIM needs at least 2 qubits, got {self.n_qubits}")
        # 退化した分布 (low == high) は固定磁場として許容する
        if not self.field_low <= self.field_high:
            raise ValueError(f"invalid field bounds [{self.field_low}, {self.field_high}]")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError(f"rng_seed must be an unsigned 64-bit integer, got {self.rng_seed}")


def parse_pauli_sum(text: str) -> WeightedPauliSum:
    """
    .psum テキストを読み込む

    書式: 任意の先頭行 "# qubits: <n>"、以降 1 行 1 項 "<係数> <ラベル>"。
    "#" で始まる行と空行は無視する。
    """
    n_qubits: int | None = None
    terms: list[tuple[float, PauliString]] = []
    seen_content = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if not seen_content and n_qubits is None and line.startswith(HEADER_PREFIX):
                value = line[len(HEADER_PREFIX) :].strip()
                try:
                    n_qubits = int(value)
                except ValueError:
                    raise PauliFormatError(f"invalid qubit count {value!r}", line=lineno) from None
                if n_qubits < 1:
                    raise PauliFormatError(f"qubit count must be positive, got {n_qubits}", line=lineno)
            seen_content = True
            continue
        seen_content = True

        parts = line.split()
        if len(parts) != 2:
            raise PauliFormatError(f"expected '<coefficient> <label>', got {line!r}", line=lineno)
        coeff_text, label = parts
        try:
            coeff = float(coeff_text)
        except ValueError:
            raise PauliFormatError(f"non-numeric coefficient {coeff_text!r}", line=lineno) from None
        if not math.isfinite(coeff):
            raise PauliFormatError(f"non-finite coefficient {coeff_text!r}", line=lineno)
        try:
            pauli = PauliString(label)
        except PauliFormatError as e:
            raise PauliFormatError(str(e), line=lineno) from None

        expected = n_qubits if n_qubits is not None else (terms[0][1].n_qubits if terms else None)
        if expected is not None and pauli.n_qubits != expected:
            raise PauliFormatError(
                f"label {label} has {pauli.n_qubits} qubits, expected {expected}", line=lineno
            )
        terms.append((coeff, pauli))

    if n_qubits is None and not terms:
        raise PauliFormatError("empty Pauli sum without '# qubits:' header")
    return WeightedPauliSum(tuple(terms), n_qubits)


def serialize_pauli_sum(h: WeightedPauliSum) -> str:
    """正規化済みの和を .psum テキストに書き出す(空の和はヘッダのみ)"""
    if not h.terms:
        return f"{HEADER_PREFIX} {h.n_qubits}\n"
    return "".join(f"{coeff!r} {pauli.label}\n" for coeff, pauli in h.terms)


def read_pauli_sum(path: str | Path) -> WeightedPauliSum:
    with open(path, encoding="utf-8") as f:
        return parse_pauli_sum(f.read())


def write_pauli_sum(h: WeightedPauliSum, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize_pauli_sum(h))


def abs_coefficient_sum(h: WeightedPauliSum) -> float:
    """Σ_i |c_i| (λ_scale ヒューリスティックの分子)"""
    return math.fsum(abs(c) for c, _ in h.terms)


def hamiltonian_hash(h: WeightedPauliSum) -> str:
    """正規化シリアライズの sha256"""
    text = f"{HEADER_PREFIX} {h.n_qubits}\n" + "".join(f"{c!r} {p.label}\n" for c, p in h.terms)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def generate_rfim(spec: RfimSpec) -> WeightedPauliSum:
    """シード固定の RFIM インスタンスを生成(Z のみの対角演算子)"""
    n = spec.n_qubits
    rng = np.random.default_rng(spec.rng_seed)
    fields = rng.uniform(spec.field_low, spec.field_high, size=n)

    terms: list[tuple[float, PauliString]] = []
    for i in range(n - 1):
        label = ["I"] * n
        label[i] = label[i + 1] = "Z"
        terms.append((-spec.coupling_j, PauliString("".join(label))))
    for i in range(n):
        label = ["I"] * n
        label[i] = "Z"
        terms.append((float(fields[i]), PauliString("".join(label))))
    return WeightedPauliSum(tuple(terms), n)


def load_bundled(name: str) -> WeightedPauliSum:
    """同梱ハミルトニアン(h2, lih)を読み込む"""
    path = HAMILTONIAN_DIR / f"{name.lower()}.psum"
    if not path.exists():
        available = sorted(p.stem for p in HAMILTONIAN_DIR.glob("*.psum"))
        raise FileNotFoundError(f"bundled Hamiltonian {name!r} not found (available: {available})")
    return read_pauli_sum(path)
