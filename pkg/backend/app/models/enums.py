from enum import Enum


class CheckName(str, Enum):
    STEVENS = "stevens"
    WEIL = "weil"
    DR = "dr"
    THM_WN = "thm-wn"
    THM_W8 = "thm-w8"
    GL4_DUAL = "gl4-dual"
    GERM_DECAY = "germ-decay"


class PathKind(str, Enum):
    GENERIC = "generic"
    GL4_FAST = "gl4_fast"
    S2 = "s2"
    SKIPPED = "skipped"  # 超出预算的扫描点，记录但不计入通过/失败
