import sys
import argparse
import traceback

from core.logger import log


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finecone",
        description="奇异方程组 G[z] = 0 的 k 横截锥精细分解：精确分析与浮点校验",
    )
    parser.add_argument("--versions", action="store_true", help="显示依赖包版本后退出")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="提高日志级别（-v info，-vv debug）")
    sub = parser.add_subparsers(dest="command")

    analyze = sub.add_parser("analyze", help="分析问题文件并写出 JSON 报告")
    analyze.add_argument("problem", help="问题文件路径")
    analyze.add_argument("-o", "--output", help="报告路径，默认标准输出")
    analyze.add_argument("--arc", type=int, metavar="L", help="同时求长度为 L 的弧前缀")
    analyze.add_argument("--k-max", type=int, help="横截阶搜索上限")
    analyze.add_argument("--exact-only", action="store_true", help="只做精确分析，跳过浮点校验")

    verify = sub.add_parser("verify", help="在随机有理实例上运行精确恒等式套件")
    verify.add_argument("--k", type=int, dest="k_max", help="k 的上限（默认读配置 verify.k_max）")
    verify.add_argument("--count", type=int, help="实例个数")
    verify.add_argument("--seed", type=int, help="随机种子")
    verify.add_argument("-o", "--output", help="报告路径，默认标准输出")
    verify.add_argument("--corrupt", metavar="M,L,VALUE", help="测试钩子：运行期间把 d_{M,L} 改为 VALUE")

    trace = sub.add_parser("trace", help="写出 ε 网格上的速率表（CSV）")
    trace.add_argument("problem", help="问题文件路径")
    trace.add_argument("--grid", default="", help="eps_max:eps_min:points，留空使用默认网格")
    trace.add_argument("-o", "--output", help="CSV 路径，默认标准输出")
    trace.add_argument("--k-max", type=int, help="横截阶搜索上限")

    example = sub.add_parser("example", help="输出内置问题文件")
    example.add_argument("name", help="primary / secondary / pitchfork / regular / node")
    example.add_argument("-o", "--output", help="输出路径，默认标准输出")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        log.set_level("debug" if args.verbose > 1 else "info")

    try:
        from cli import commands

        if args.versions:
            print("\n".join(commands.versions()))
            return 0
        if args.command == "analyze":
            return commands.cmd_analyze(args.problem, args.output, arc=args.arc,
                                        exact_only=args.exact_only, k_max=args.k_max)
        if args.command == "verify":
            return commands.cmd_verify(k_max=args.k_max, count=args.count, seed=args.seed,
                                       output=args.output, corrupt=args.corrupt)
        if args.command == "trace":
            return commands.cmd_trace(args.problem, args.grid, args.output, k_max=args.k_max)
        if args.command == "example":
            return commands.cmd_example(args.name, args.output)
        parser.print_help()
        return 2
    except Exception as e:
        # 命令内部的异常已由 catch_exceptions 处理，这里只兜住启动阶段的错误
        print(f"程序启动时发生错误:\n{str(e)}\n\n{traceback.format_exc()}", file=sys.stderr)
        return 3


if __name__ == '__main__':
    sys.exit(main())
