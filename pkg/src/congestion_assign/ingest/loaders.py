"""
入力ファイルの読み込み

ネットワーク・OD需要・リンク状態・パラメータ範囲・トポロジーの各ファイルを読み込み、
検証済みのモデルに変換する。単位はフィールド名（length_km, demand_veh_hr）で明示する。
"""

import csv
import logging
from importlib import resources
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from congestion_assign.core.models import (
    BASIC_PARAM_ORDER,
    BasicParams,
    DemandTable,
    Link,
    LinkParams,
    ParamRanges,
    StateVector,
    coerce_id,
)
from congestion_assign.core.network import Network, NetworkError, build_network
from congestion_assign.fdgen.consistency import ConsistencyReport, verify_consistency
from congestion_assign.fdgen.generator import LinkSkeleton, derive_link_params

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
COEFFICIENT_FIELDS = ("alpha", "beta", "gamma", "t_free", "q_max", "q_cr")


class InputFileError(Exception):
    """入力ファイルの読み込み・検証エラー"""

    def __init__(self, message: str, path: Path | str | None = None, location: str | None = None):
        super().__init__(message)
        self.path = Path(path) if path is not None else None
        self.location = location

    def __str__(self) -> str:
        where = str(self.path) if self.path else ""
        if self.location:
            where = f"{where}:{self.location}" if where else self.location
        message = super().__str__()
        return f"{where}: {message}" if where else message


# =============================================================================
# ファイル形式
# =============================================================================


class LinkSpec(BaseModel):
    """ネットワークファイルのリンク（係数を直接与えるか、基本パラメータから導出する）"""

    model_config = ConfigDict(extra="forbid")

    id: str | None = None
    tail: str
    head: str
    length_km: float = Field(gt=0)
    alpha: float | None = None
    beta: float | None = None
    gamma: float | None = None
    t_free: float | None = None
    q_max: float | None = None
    q_cr: float | None = None
    d_max: float | None = None
    basic: BasicParams | None = None

    @field_validator("id", "tail", "head", mode="before")
    @classmethod
    def coerce_ids(cls, value: object) -> object:
        return coerce_id(value)

    @model_validator(mode="after")
    def check_one_source(self) -> "LinkSpec":
        given = [name for name in COEFFICIENT_FIELDS if getattr(self, name) is not None]
        if self.basic is not None and given:
            raise ValueError("係数と basic は同時に指定できません")
        if self.basic is None and len(given) != len(COEFFICIENT_FIELDS):
            missing = [name for name in COEFFICIENT_FIELDS if getattr(self, name) is None]
            raise ValueError(f"係数が不足しています: {', '.join(missing)}（または basic を指定）")
        return self

    @property
    def link_id(self) -> str:
        return self.id or f"{self.tail}-{self.head}"

    def to_link(self) -> Link:
        if self.basic is not None:
            params = derive_link_params(self.basic, self.length_km)
        else:
            params = LinkParams(
                alpha=self.alpha,
                beta=self.beta,
                gamma=self.gamma,
                t_free=self.t_free,
                q_max=self.q_max,
                q_cr=self.q_cr,
                d_max=self.d_max,
            )
        return Link(
            id=self.link_id,
            tail=self.tail,
            head=self.head,
            length_km=self.length_km,
            params=params,
        )


class NetworkFile(BaseModel):
    """ネットワークファイル"""

    schema_version: int = SCHEMA_VERSION
    name: str = ""
    meta: dict[str, Any] = Field(default_factory=dict)
    nodes: list[str]
    links: list[LinkSpec]

    @field_validator("nodes", mode="before")
    @classmethod
    def coerce_nodes(cls, value: object) -> object:
        if isinstance(value, list):
            return [coerce_id(v) for v in value]
        return value

    @field_validator("schema_version")
    @classmethod
    def check_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"未対応のスキーマバージョンです: {value}")
        return value


class TopologyFile(BaseModel):
    """トポロジーファイル（係数を持たないネットワーク）"""

    name: str = ""
    nodes: list[str]
    links: list[LinkSkeleton]

    @field_validator("nodes", mode="before")
    @classmethod
    def coerce_nodes(cls, value: object) -> object:
        if isinstance(value, list):
            return [coerce_id(v) for v in value]
        return value

    @field_validator("links", mode="before")
    @classmethod
    def default_ids(cls, value: object) -> object:
        if not isinstance(value, list):
            return value
        filled = []
        for item in value:
            if isinstance(item, dict) and item.get("id") is None:
                item = {**item, "id": f"{coerce_id(item.get('tail'))}-{coerce_id(item.get('head'))}"}
            filled.append(item)
        return filled


# =============================================================================
# 共通処理
# =============================================================================


def _read_yaml(path: Path) -> Any:
    if not path.exists():
        raise InputFileError("ファイルが見つかりません", path)
    try:
        with open(path, encoding="utf-8") as f:
            return yaml.safe_load(f)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        location = f"{mark.line + 1}行{mark.column + 1}列" if mark is not None else None
        problem = getattr(e, "problem", None) or str(e)
        raise InputFileError(f"YAMLの構文エラー: {problem}", path, location) from e


def _validate(model: type[BaseModel], data: Any, path: Path) -> Any:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise InputFileError(
            f"{first['msg']}（全{e.error_count()}件）", path, location or None
        ) from e


def fixture_path(name: str) -> Path:
    """同梱フィクスチャのパス"""
    return Path(str(resources.files("congestion_assign.fixtures").joinpath(name)))


# =============================================================================
# ネットワーク
# =============================================================================


def check_network(
    network: Network, ranges: ParamRanges | None = None, tolerance: float | None = None
) -> list[ConsistencyReport]:
    """全リンクの整合性検査"""
    return [verify_consistency(link, ranges, tolerance) for link in network.links]


def load_network(
    path: Path | str,
    ranges: ParamRanges | None = None,
    strict: bool = True,
) -> Network:
    """ネットワークファイルを読み込む

    読み込み後に全リンクの整合性を検査し、範囲外れは警告としてログに出す。
    strict=True では恒等式の破れ（符号・連続性）をエラーにする。
    """
    path = Path(path)
    data = _read_yaml(path)
    spec: NetworkFile = _validate(NetworkFile, data, path)

    try:
        links = [link.to_link() for link in spec.links]
        network = build_network(spec.nodes, links, name=spec.name or path.stem, meta=spec.meta)
    except NetworkError as e:
        raise InputFileError(str(e), path, f"links[{e.link_id}]" if e.link_id else None) from e
    except ValidationError as e:
        raise InputFileError(str(e), path, "links") from e

    for report in check_network(network, ranges):
        for check in report.warnings:
            logger.warning(f"リンク {report.link_id}: {check.detail}")
        if not report.ok:
            details = "; ".join(c.detail for c in report.failures)
            if strict:
                raise InputFileError(
                    f"係数の整合性エラー: {details}", path, f"links[{report.link_id}]"
                )
            logger.warning(f"リンク {report.link_id}: 係数の整合性エラー {details}")

    logger.info(f"ネットワークを読み込みました: {path}（{len(network.nodes)}ノード, {len(network.links)}リンク）")
    return network


def _float_text(value: float) -> float:
    # YAML出力で 1e-05 などをそのまま往復させる
    return float(repr(value)) if isinstance(value, float) else value


def write_network(path: Path | str, network: Network, meta: dict[str, Any] | None = None) -> Path:
    """ネットワークを係数付きのネットワークファイルに書き出す"""
    path = Path(path)
    links = []
    for link in network.links:
        p = link.params
        entry: dict[str, Any] = {
            "id": link.id,
            "tail": link.tail,
            "head": link.head,
            "length_km": _float_text(link.length_km),
        }
        for name in COEFFICIENT_FIELDS:
            entry[name] = _float_text(getattr(p, name))
        if p.d_max is not None:
            entry["d_max"] = _float_text(p.d_max)
        links.append(entry)

    document = {
        "schema_version": SCHEMA_VERSION,
        "name": network.name,
        "meta": dict(meta if meta is not None else network.meta),
        "nodes": list(network.nodes),
        "links": links,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(document, f, allow_unicode=True, sort_keys=False)
    logger.info(f"ネットワークを書き出しました: {path}")
    return path


def load_topology(path: Path | str) -> TopologyFile:
    """トポロジーファイルを読み込む"""
    path = Path(path)
    topology: TopologyFile = _validate(TopologyFile, _read_yaml(path), path)
    declared = set(topology.nodes)
    for link in topology.links:
        for endpoint in (link.tail, link.head):
            if endpoint not in declared:
                raise InputFileError(
                    f"リンク {link.id} の端点 {endpoint} が未定義のノードです", path, f"links[{link.id}]"
                )
    return topology


# =============================================================================
# OD需要
# =============================================================================


def _matrix_entries(
    nodes: list[str], rows: list[list[Any]], path: Path
) -> list[dict[str, Any]]:
    if len(rows) != len(nodes):
        raise InputFileError(f"行数 {len(rows)} がノード数 {len(nodes)} と一致しません", path, "matrix")
    entries = []
    for i, (origin, row) in enumerate(zip(nodes, rows)):
        if len(row) != len(nodes):
            raise InputFileError(
                f"列数 {len(row)} がノード数 {len(nodes)} と一致しません", path, f"matrix.rows.{i}"
            )
        for destination, value in zip(nodes, row):
            entries.append({"origin": origin, "destination": destination, "demand_veh_hr": value})
    return entries


def _read_delimited(path: Path) -> list[dict[str, Any]]:
    delimiter = "\t" if path.suffix.lower() == ".tsv" else ","
    with open(path, encoding="utf-8", newline="") as f:
        table = [row for row in csv.reader(f, delimiter=delimiter) if any(cell.strip() for cell in row)]
    if not table:
        raise InputFileError("空のファイルです", path)
    header = [cell.strip() for cell in table[0][1:]]
    origins = [row[0].strip() for row in table[1:]]
    if origins != header:
        raise InputFileError("行見出しと列見出しのノードが一致しません", path, "1行")
    rows: list[list[Any]] = []
    for line, row in enumerate(table[1:], start=2):
        try:
            rows.append([float(cell) for cell in row[1:]])
        except ValueError as e:
            raise InputFileError(f"数値に変換できません: {e}", path, f"{line}行") from e
    return _matrix_entries(header, rows, path)


def load_demands(path: Path | str) -> DemandTable:
    """OD需要ファイルを読み込む

    形式: YAMLの demands リスト、YAMLの matrix（nodes と rows）、または行列形式の CSV/TSV。
    対角要素は除外される。
    """
    path = Path(path)
    if path.suffix.lower() in (".csv", ".tsv"):
        if not path.exists():
            raise InputFileError("ファイルが見つかりません", path)
        entries = _read_delimited(path)
    else:
        data = _read_yaml(path)
        if not isinstance(data, dict):
            raise InputFileError("demands または matrix を含むマッピングが必要です", path)
        if "matrix" in data:
            matrix = data["matrix"] or {}
            nodes = [coerce_id(n) for n in matrix.get("nodes", [])]
            entries = _matrix_entries(nodes, matrix.get("rows", []), path)
        elif "demands" in data:
            entries = data["demands"] or []
        else:
            raise InputFileError("demands または matrix がありません", path)

    table: DemandTable = _validate(DemandTable, {"entries": entries}, path)
    logger.info(f"OD需要を読み込みました: {path}（{len(table.entries)}件, 総需要 {table.total_demand:g} 台/時）")
    return table


def write_demands(path: Path | str, demands: DemandTable) -> Path:
    """OD需要をYAMLのリスト形式で書き出す"""
    path = Path(path)
    document = {"demands": [e.model_dump() for e in demands.entries]}
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(document, f, allow_unicode=True, sort_keys=False)
    return path


# =============================================================================
# リンク状態・パラメータ範囲
# =============================================================================


def load_state(path: Path | str | None, network: Network) -> StateVector:
    """リンク状態ファイルを読み込む（ファイルなし・記載のないリンクは δ = 1）

    形式: states（リンクID → 0/1）または congested（渋滞リンクIDのリスト）。
    """
    if path is None:
        return network.uncongested_state()
    path = Path(path)
    data = _read_yaml(path) or {}
    if not isinstance(data, dict):
        raise InputFileError("states または congested を含むマッピングが必要です", path)

    states: dict[str, int] = {}
    if "states" in data:
        for key, value in (data["states"] or {}).items():
            if value not in (0, 1):
                raise InputFileError(f"状態は 0 か 1 です: {value}", path, f"states.{key}")
            states[str(coerce_id(key))] = int(value)
    for key in data.get("congested", None) or []:
        states[str(coerce_id(key))] = 0

    for link_id in states:
        if link_id not in network.link_index:
            raise InputFileError(f"未定義のリンクです: {link_id}", path, f"states.{link_id}")

    vector = StateVector(states={a: states.get(a, 1) for a in network.link_ids})
    logger.info(f"リンク状態を読み込みました: {path}（渋滞 {len(vector.congested_links())}リンク）")
    return vector


def write_state(path: Path | str, state: StateVector) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump({"states": dict(state.states)}, f, allow_unicode=True, sort_keys=False)
    return path


def load_ranges(path: Path | str | None) -> ParamRanges:
    """パラメータ範囲ファイルを読み込む（記載のない項目は既定の範囲）

    各項目は [lo, hi] または {lo: , hi: } で指定する。
    """
    if path is None:
        return ParamRanges()
    path = Path(path)
    data = _read_yaml(path) or {}
    if not isinstance(data, dict):
        raise InputFileError("パラメータ名をキーとするマッピングが必要です", path)
    unknown = [key for key in data if key not in BASIC_PARAM_ORDER]
    if unknown:
        raise InputFileError(f"未知のパラメータです: {unknown[0]}", path, str(unknown[0]))

    values: dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, list | tuple):
            if len(value) != 2:
                raise InputFileError("範囲は [lo, hi] の2要素です", path, key)
            values[key] = {"lo": value[0], "hi": value[1]}
        else:
            values[key] = value
    ranges: ParamRanges = _validate(ParamRanges, values, path)
    return ranges

