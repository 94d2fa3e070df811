"""命令行入口：sum / orbital / germ / check / weyl。

退出码：0 通过，1 检查失败，2 参数或配置错误，3 超出枚举预算。
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from loguru import logger
from pydantic import ValidationError

from app.core.config import get_settings
from app.core.errors import ConfigError, Infeasible, KloostermanError
from app.core.logging_config import log_scope
from app.models.enums import CheckName
from app.schemas.kloosterman import GermRequest, OrbitalRequest, SumRequest
from app.schemas.report import SweepConfig
from app.services.bounds_harness import (
    compute_germ_report,
    compute_orbital_report,
    compute_sum_report,
    run_sweep,
    spec_from_params,
)
from app.services.group_geometry import WeylPerm, relevant_weyl_elements

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"无法解析整数列表 {text!r}") from exc


def _csv_strings(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_cell_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, required=True, help="矩阵阶数 n")
    parser.add_argument("--p", type=int, required=True, help="素数 p")
    parser.add_argument("--m", type=int, default=1, help="层级 m（默认 1）")
    parser.add_argument("--a", type=_csv_ints, default=[], help="阶梯指数 a_1,…,a_{n-1}")
    parser.add_argument("--units", type=_csv_ints, default=None, help="环面单位 v_1,…,v_n")
    parser.add_argument("--nu", type=_csv_strings, default=None, help="ν_1,…,ν_{n-1}，可写 1/3")
    parser.add_argument("--nu-prime", type=_csv_strings, default=None, help="ν′_1,…,ν′_{n-1}")


def _parse_torus(text: str) -> tuple[list[int], list[int] | None]:
    """"1,0,-1:1,1,1" → 赋值 (1,0,-1) 与单位 (1,1,1)；单位部分可省略。"""

    valuations, _, units = text.partition(":")
    return _csv_ints(valuations), (_csv_ints(units) if units else None)


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kloosterman",
        description="GL(n) 局部 Kloosterman 和、轨道积分与上界验证",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sum_parser = commands.add_parser("sum", help="计算 Kl_p(ψ; c, w_{G_n})")
    _add_cell_arguments(sum_parser)
    sum_parser.add_argument("--fast-gl4", action="store_true", help="n=4 时使用闭式参数化")
    sum_parser.add_argument("--out", type=Path, default=None, help="结果 JSON 路径，缺省打印到标准输出")

    orbital_parser = commands.add_parser("orbital", help="Dabrowski–Reeder 轨道积分")
    orbital_parser.add_argument("--n", type=int, required=True)
    orbital_parser.add_argument("--p", type=int, required=True)
    orbital_parser.add_argument("--torus", type=_parse_torus, required=True, help="赋值,…[:单位,…]")
    orbital_parser.add_argument("--oracle", action="store_true", help="同时输出暴力计数")

    germ_parser = commands.add_parser("germ", help="相对 Shalika 芽")
    _add_cell_arguments(germ_parser)
    germ_parser.add_argument("--relevant", type=_csv_ints, default=None, help="相关 Weyl 元的组成")

    check_parser = commands.add_parser("check", help="执行参数扫描并写出 JSON/CSV 报告")
    check_parser.add_argument("check", choices=[name.value for name in CheckName])
    check_parser.add_argument("--grid", type=Path, required=True, help="网格配置 JSON")
    check_parser.add_argument("--out", type=Path, default=None, help="报告路径前缀，缺省写入 report_dir")

    weyl_parser = commands.add_parser("weyl", help="列出 Weyl 元")
    weyl_parser.add_argument("--n", type=int, required=True)
    weyl_parser.add_argument("--relevant", action="store_true", help="列出全部相关 Weyl 元")
    return parser


def _emit(payload: dict | list, out: Path | None = None) -> None:
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if out is None:
        print(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text + "\n", encoding="utf-8")
    logger.info("结果已写入 {}", out)


def _cell_fields(args: argparse.Namespace) -> dict:
    return {
        "n": args.n,
        "p": args.p,
        "m": args.m,
        "a": args.a,
        "units": args.units,
        "nu": args.nu,
        "nu_prime": args.nu_prime,
    }


def _run_sum(args: argparse.Namespace) -> int:
    settings = get_settings()
    request = SumRequest(**_cell_fields(args), fast_gl4=args.fast_gl4)
    report = compute_sum_report(spec_from_params(request, settings), request.fast_gl4, settings)
    _emit(report.model_dump(mode="json"), args.out)
    return EXIT_OK


def _run_orbital(args: argparse.Namespace) -> int:
    valuations, units = args.torus
    if len(valuations) != args.n:
        raise ConfigError(f"--torus 需要 {args.n} 个赋值，实际 {len(valuations)}")
    request = OrbitalRequest(p=args.p, exponents=valuations, units=units, oracle=args.oracle)
    _emit(compute_orbital_report(request, get_settings()).model_dump(mode="json"))
    return EXIT_OK


def _run_germ(args: argparse.Namespace) -> int:
    request = GermRequest(**_cell_fields(args), relevant=args.relevant)
    _emit(compute_germ_report(request, get_settings()).model_dump(mode="json"))
    return EXIT_OK


def _run_check(args: argparse.Namespace) -> int:
    try:
        raw = json.loads(args.grid.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"无法读取网格配置 {args.grid}: {exc}") from exc
    raw["check"] = args.check
    summary = run_sweep(SweepConfig.model_validate(raw), get_settings(), args.out)
    _emit(summary.model_dump(mode="json"))
    return EXIT_OK if summary.ok else EXIT_CHECK_FAILED


def _run_weyl(args: argparse.Namespace) -> int:
    if args.relevant:
        payload = [
            {"composition": list(w.composition), "label": w.label, "matrix": w.int_matrix()}
            for w in relevant_weyl_elements(args.n)
        ]
    else:
        payload = [{"composition": [args.n], "label": f"w_G{args.n}", "matrix": WeylPerm.longest(args.n).int_matrix()}]
    _emit(payload)
    return EXIT_OK


_COMMANDS = {
    "sum": _run_sum,
    "orbital": _run_orbital,
    "germ": _run_germ,
    "check": _run_check,
    "weyl": _run_weyl,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        with log_scope(f"cli-{args.command}"):
            return _COMMANDS[args.command](args)
    except Infeasible as exc:
        logger.error("超出枚举预算: {}", exc)
        return EXIT_BUDGET
    except (ConfigError, ValidationError) as exc:
        logger.error("参数错误: {}", exc)
        return EXIT_CONFIG
    except KloostermanError as exc:
        logger.error("计算失败: {}", exc)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
