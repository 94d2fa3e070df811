"""计算过程中的异常类型。全部继承 ValueError，调用方可以统一捕获。"""


class KloostermanError(ValueError):
    """所有领域异常的基类。"""


class ConfigError(KloostermanError):
    """参数或扫描网格不合法。"""


class PrecisionLoss(KloostermanError):
    """在当前精度下为 0 但并非精确零的值被拿来做判定。"""


class ScaleOverflow(KloostermanError):
    """xi_of 的输入分母超过了分圆阶 p^L，调用方需要提高 L。"""


class NotInBigCell(KloostermanError):
    """Bruhat 分解中主元消失，或环面部分与给定的 c 不一致。"""


class NotInvertible(KloostermanError):
    """矩阵在工作精度下不可逆。"""


class Infeasible(KloostermanError):
    """候选数量超过配置的预算。"""


class FactorizationMismatch(KloostermanError):
    """S_w 的直接求和与 S_2 因子乘积不一致，说明实现有缺陷。"""


class BlockMismatch(KloostermanError):
    """分块数据与相关 Weyl 元的组成不匹配。"""


class DetNotUnit(KloostermanError):
    """分块环面的行列式不是单位。"""


class DegenerateDenominator(KloostermanError):
    """GL(4) 闭式公式中的分母在精度内为零。"""


class OrbitInconsistency(KloostermanError):
    """环面作用把元素带出了枚举集合，或者两条轨道相交。"""
