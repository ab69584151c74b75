"""
リンク係数生成

基本図の基本パラメータを一様乱数で生成し、リンク長とともに2分岐旅行時間関数の係数へ変換する。
"""

import logging
from collections.abc import Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from congestion_assign.core.models import (
    BASIC_PARAM_ORDER,
    BasicParams,
    Link,
    LinkParams,
    ParamRanges,
    coerce_id,
)

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"


class LinkSkeleton(BaseModel):
    """係数を持たないリンク（トポロジー定義）"""

    model_config = ConfigDict(frozen=True)

    id: str
    tail: str
    head: str
    length_km: float = Field(gt=0)

    @field_validator("id", "tail", "head", mode="before")
    @classmethod
    def coerce_ids(cls, value: object) -> object:
        return coerce_id(value)


def make_rng(seed: int) -> np.random.Generator:
    """シード付きの明示的な状態を持つ乱数生成器"""
    return np.random.Generator(np.random.PCG64(seed))


def sample_basic_params(
    ranges: ParamRanges,
    seed: int | np.random.Generator,
) -> BasicParams:
    """基本パラメータを lo + (hi - lo)ζ で生成する

    ζ は [0, 1) の一様乱数で、v_free, v_cr, w, d_jam, r_mc の順に1つずつ引く。
    """
    rng = make_rng(seed) if isinstance(seed, int) else seed
    values: dict[str, float] = {}
    for name in BASIC_PARAM_ORDER:
        interval = ranges.interval(name)
        zeta = float(rng.random())
        values[name] = interval.lo + (interval.hi - interval.lo) * zeta
    return BasicParams(**values)


def derive_link_params(basic: BasicParams, length_km: float) -> LinkParams:
    """基本パラメータとリンク長から旅行時間関数の係数を求める"""
    if length_km <= 0:
        raise ValueError(f"リンク長は正である必要があります: {length_km}")

    d_max = basic.d_jam / (1.0 + basic.v_cr / basic.w)
    q_max = d_max * basic.v_cr
    q_cr = q_max * (1.0 + basic.r_mc)

    return LinkParams(
        alpha=length_km * (d_max / q_max - 1.0 / basic.v_free) / q_cr,
        beta=length_km * basic.d_jam,
        gamma=length_km * (d_max - basic.d_jam) / q_max,
        t_free=length_km / basic.v_free,
        q_max=q_max,
        q_cr=q_cr,
        d_max=d_max,
    )


def generate_links(
    skeletons: Iterable[LinkSkeleton],
    ranges: ParamRanges,
    seed: int,
) -> tuple[list[Link], dict[str, BasicParams]]:
    """トポロジーの各リンクに係数を与える

    1つの乱数生成器をリンク順に使うため、同じシードなら同じ結果になる。
    """
    rng = make_rng(seed)
    links: list[Link] = []
    basics: dict[str, BasicParams] = {}
    for skeleton in skeletons:
        basic = sample_basic_params(ranges, rng)
        basics[skeleton.id] = basic
        links.append(
            Link(
                id=skeleton.id,
                tail=skeleton.tail,
                head=skeleton.head,
                length_km=skeleton.length_km,
                params=derive_link_params(basic, skeleton.length_km),
            )
        )
    logger.info(f"リンク係数を生成しました: {len(links)}リンク (seed={seed}, {RNG_ALGORITHM})")
    return links, basics
