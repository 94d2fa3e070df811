"""线程池调度：枚举、暴力计数与参数扫描共用的分片执行器。"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Sequence, TypeVar

from loguru import logger

T = TypeVar("T")
R = TypeVar("R")

# 动态线程池大小（根据CPU核心数推导）
CPU_COUNT = os.cpu_count() or 4
ENUMERATION_WORKERS = max(1, CPU_COUNT // 2)  # 枚举是纯计算任务，使用一半核心数
SWEEP_WORKERS = max(2, CPU_COUNT)  # 扫描点彼此独立


def resolve_workers(requested: int | None, fallback: int) -> int:
    if requested is None:
        return fallback
    return max(1, requested)


def run_partitioned(
    func: Callable[[T], R],
    chunks: Sequence[T],
    workers: int,
    name: str,
) -> list[R]:
    """把 chunks 分发到线程池执行，结果按 chunks 的原始顺序返回。"""

    if not chunks:
        return []
    started = time.perf_counter()
    if workers <= 1 or len(chunks) == 1:
        results = [func(chunk) for chunk in chunks]
    else:
        results: list[R | None] = [None] * len(chunks)
        with ThreadPoolExecutor(
            max_workers=min(workers, len(chunks)),
            thread_name_prefix=name,
        ) as executor:
            futures = {executor.submit(func, chunk): index for index, chunk in enumerate(chunks)}
            for future in as_completed(futures):
                results[futures[future]] = future.result()
    logger.debug(
        "{}: {} 个分片完成, 线程数={}, 耗时 {:.1f} ms",
        name,
        len(chunks),
        workers,
        (time.perf_counter() - started) * 1000,
    )
    return results  # type: ignore[return-value]
