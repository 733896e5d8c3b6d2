"""
模拟器异常层次

每个异常带一个 reason 字段, 作为运行终止原因写入报告与运行元数据。
"""


class SimulationError(Exception):
    """模拟器基础异常"""
    reason = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(SimulationError):
    """配置解析或校验失败"""
    reason = "config_error"


class ResolutionError(SimulationError):
    """网格分辨率不足 (截断函数过渡环或初始数据欠解析)"""
    reason = "under_resolved"


class ContractViolation(SimulationError):
    """操作前置条件被违反"""
    reason = "contract_violation"


class NumericalError(SimulationError):
    """求解器数值终止的基类"""
    reason = "numerical_error"

    def __init__(self, message: str, t: float = 0.0, step_count: int = 0):
        super().__init__(message)
        self.t = t
        self.step_count = step_count


class DivergenceError(NumericalError):
    """场中出现 NaN/Inf"""
    reason = "divergence"


class PositivityError(NumericalError):
    """u 的负下冲超出容差"""
    reason = "positivity"


class StiffnessError(NumericalError):
    """时间步长连续停留在下限 (数值坍缩)"""
    reason = "stiffness"
