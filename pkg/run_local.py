"""本地启动计算接口：python run_local.py [--port 8000] [--no-reload]。

.env 可选，缺省时全部使用 Settings 的默认值。
"""

import argparse
import logging
import sys
from pathlib import Path

import uvicorn
from dotenv import load_dotenv

ROOT = Path(__file__).resolve().parent
BACKEND = ROOT / "backend"


def main() -> None:
    parser = argparse.ArgumentParser(description="启动 Kloosterman Bench 计算接口")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--no-reload", action="store_true", help="关闭热重载（长时间扫描时使用）")
    args = parser.parse_args()

    if (ROOT / ".env").exists():
        load_dotenv(ROOT / ".env")
    sys.path.insert(0, str(BACKEND))
    logging.getLogger("uvicorn.access").setLevel(logging.WARNING)
    uvicorn.run(
        "app.main:app",
        host=args.host,
        port=args.port,
        reload=not args.no_reload,
        app_dir=str(BACKEND),
        access_log=False,
    )


if __name__ == "__main__":
    main()
