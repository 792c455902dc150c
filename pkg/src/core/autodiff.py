"""
反向模式自动微分引擎
记录计算过程（Tape），支持前向重放、反向传播和数值梯度检查

所有运算既可作用于 Tensor（记录到 Tape 上），也可直接作用于 numpy 数组
（此时不记录，直接返回数组），同一个函数因此可同时用于训练和数值校验。
"""

from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

try:
    # 尝试相对导入
    from ..utils.i18n import get_text
except ImportError:
    # 回退到绝对导入
    from utils.i18n import get_text


# 训练与校验统一使用 64 位浮点
DTYPE = np.float64


class Parameter:
    """模型参数：数值与同形状的梯度"""

    def __init__(self, value: Any, name: str = ""):
        self.name = name
        self.value = np.array(value, dtype=DTYPE)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        """梯度清零"""
        self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class Tensor:
    """Tape 上的一个节点"""

    # 让 ndarray 的二元运算把控制权交给 Tensor 的反射运算
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", index: int, op: str, parents: Tuple[Any, ...],
                 kwargs: Dict[str, Any], value: np.ndarray, requires_grad: bool,
                 name: str = "", param: Optional[Parameter] = None):
        self.tape = tape
        self.index = index
        self.op = op
        self.parents = parents
        self.kwargs = kwargs
        self.value = value
        self.adjoint: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self.param = param

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        return f"Tensor(#{self.index} {self.op}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims: bool = False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """把广播后的梯度求和回原始形状"""
    grad = np.asarray(grad)
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    """把归约后的梯度扩展回输入形状"""
    if axis is None:
        return np.broadcast_to(np.reshape(g, (1,) * len(shape)), shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def _logsumexp_forward(a, axis=-1, keepdims=False):
    a = np.asarray(a, dtype=DTYPE)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide='ignore'):
        out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    if keepdims:
        return out
    if axis is None:
        return out.reshape(())
    return np.squeeze(out, axis=axis)


def _logsumexp_vjp(g, out, a, axis=-1, keepdims=False):
    if axis is None:
        out_k = np.reshape(out, (1,) * a.ndim)
    else:
        out_k = out if keepdims else np.expand_dims(out, axis)
    finite = np.isfinite(out_k)
    with np.errstate(invalid='ignore'):
        weights = np.where(finite, np.exp(a - np.where(finite, out_k, 0.0)), 0.0)
    return (_expand_reduced(g, a.shape, axis, keepdims) * weights,)


def _getitem_vjp(g, out, a, index=None):
    grad = np.zeros_like(a)
    np.add.at(grad, index, g)
    return (grad,)


def _matmul_forward(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs 2-D operands, got {a.shape} @ {b.shape}")
    return a @ b


# 每个算子：(前向, 反向)。反向签名为 vjp(g, out, *inputs, **kwargs)，
# 返回值可以是延迟计算的函数，只在对应输入需要梯度时才求值
_OPS: Dict[str, Tuple[Callable, Callable]] = {
    'add': (lambda a, b: np.add(a, b),
            lambda g, out, a, b: (g, g)),
    'sub': (lambda a, b: np.subtract(a, b),
            lambda g, out, a, b: (g, -g)),
    'mul': (lambda a, b: np.multiply(a, b),
            lambda g, out, a, b: (lambda: g * b, lambda: g * a)),
    'div': (lambda a, b: np.divide(a, b),
            lambda g, out, a, b: (g / b, -g * out / b)),
    'neg': (lambda a: np.negative(a),
            lambda g, out, a: (-g,)),
    'matmul': (_matmul_forward,
               lambda g, out, a, b: (lambda: g @ np.swapaxes(b, -1, -2),
                                     lambda: np.swapaxes(a, -1, -2) @ g)),
    'exp': (lambda a: np.exp(a),
            lambda g, out, a: (g * out,)),
    'log': (lambda a: np.log(a),
            lambda g, out, a: (g / a,)),
    'square': (lambda a: np.square(a),
               lambda g, out, a: (2.0 * a * g,)),
    # 被截断的分支次梯度为 0
    'maximum': (lambda a, c: np.maximum(a, c),
                lambda g, out, a, c: (g * (a >= c), g * (a < c))),
    'minimum': (lambda a, c: np.minimum(a, c),
                lambda g, out, a, c: (g * (a <= c), g * (a > c))),
    'relu': (lambda a: np.maximum(a, 0.0),
             lambda g, out, a: (g * (a > 0),)),
    'tanh': (lambda a: np.tanh(a),
             lambda g, out, a: (g * (1.0 - out * out),)),
    'sigmoid': (lambda a: 0.5 * (1.0 + np.tanh(0.5 * np.asarray(a))),
                lambda g, out, a: (g * out * (1.0 - out),)),
    'sum': (lambda a, axis=None, keepdims=False: np.sum(a, axis=axis, keepdims=keepdims),
            lambda g, out, a, axis=None, keepdims=False: (_expand_reduced(g, a.shape, axis, keepdims),)),
    'mean': (lambda a, axis=None, keepdims=False: np.mean(a, axis=axis, keepdims=keepdims),
             lambda g, out, a, axis=None, keepdims=False: (
                 _expand_reduced(g, a.shape, axis, keepdims) * (out.size / a.size),)),
    'logsumexp': (_logsumexp_forward, _logsumexp_vjp),
    'reshape': (lambda a, shape=None: np.reshape(a, shape),
                lambda g, out, a, shape=None: (np.reshape(g, a.shape),)),
    'getitem': (lambda a, index=None: np.asarray(a)[index], _getitem_vjp),
}

# 叶子节点类型
_LEAVES = ('input', 'param', 'constant')


class Tape:
    """计算记录：节点按拓扑顺序排列"""

    def __init__(self):
        self.nodes: List[Tensor] = []
        self.inputs: List[Tensor] = []
        self._param_nodes: Dict[int, Tensor] = {}

    def _leaf(self, op: str, value: Any, requires_grad: bool, name: str,
              param: Optional[Parameter] = None) -> Tensor:
        node = Tensor(self, len(self.nodes), op, (), {}, np.array(value, dtype=DTYPE),
                      requires_grad, name=name, param=param)
        self.nodes.append(node)
        return node

    def variable(self, value: Any, name: str = "") -> Tensor:
        """声明一个可求导的输入"""
        node = self._leaf('input', value, True, name)
        self.inputs.append(node)
        return node

    def constant(self, value: Any, name: str = "") -> Tensor:
        """声明一个常量（不参与梯度计算）"""
        return self._leaf('constant', value, False, name)

    def param(self, parameter: Parameter) -> Tensor:
        """把模型参数挂到 Tape 上，同一参数只建一个节点"""
        node = self._param_nodes.get(id(parameter))
        if node is None:
            node = self._leaf('param', parameter.value, True, parameter.name, param=parameter)
            self._param_nodes[id(parameter)] = node
        return node

    def record(self, op: str, args: Sequence[Any], kwargs: Dict[str, Any]) -> Tensor:
        """执行算子并记录节点"""
        parents = tuple(a if isinstance(a, Tensor) else np.asarray(a, dtype=DTYPE) for a in args)
        values = [p.value if isinstance(p, Tensor) else p for p in parents]
        index = len(self.nodes)
        value = _run_forward(op, index, values, kwargs)
        requires_grad = any(isinstance(p, Tensor) and p.requires_grad for p in parents)
        node = Tensor(self, index, op, parents, kwargs, value, requires_grad)
        self.nodes.append(node)
        return node

    def forward_eval(self, inputs: Union[Sequence[Any], Mapping[str, Any]]) -> List[np.ndarray]:
        """用新的输入值重放整条记录，返回每个节点的数值"""
        if isinstance(inputs, Mapping):
            by_name = {node.name: node for node in self.inputs}
            unknown = set(inputs) - set(by_name)
            if unknown:
                raise ValueError(get_text('ad_unknown_input', sorted(unknown)))
            assignments = [(by_name[key], value) for key, value in inputs.items()]
        else:
            if len(inputs) != len(self.inputs):
                raise ValueError(get_text('ad_input_count', len(self.inputs), len(inputs)))
            assignments = list(zip(self.inputs, inputs))

        for node, value in assignments:
            array = np.asarray(value, dtype=DTYPE)
            if array.shape != node.value.shape:
                raise ValueError(get_text('ad_input_shape', node.index, node.name,
                                          node.value.shape, array.shape))
            node.value = array.copy()

        for node in self.nodes:
            if node.op == 'param':
                node.value = np.array(node.param.value, dtype=DTYPE)
            if node.op in _LEAVES:
                continue
            values = [p.value if isinstance(p, Tensor) else p for p in node.parents]
            node.value = _run_forward(node.op, node.index, values, node.kwargs)
        return [node.value for node in self.nodes]

    def backward(self, seed: Tensor) -> Dict[Parameter, np.ndarray]:
        """从标量节点反向传播，梯度累加到参数上"""
        if seed.tape is not self:
            raise ValueError(get_text('ad_foreign_node', seed.index))
        if seed.value.size != 1:
            raise ValueError(get_text('ad_seed_not_scalar', seed.index, seed.value.shape))

        for node in self.nodes:
            node.adjoint = None
        seed.adjoint = np.ones_like(seed.value)

        for node in reversed(self.nodes[:seed.index + 1]):
            if node.adjoint is None or not node.requires_grad or node.op in _LEAVES:
                continue
            values = [p.value if isinstance(p, Tensor) else p for p in node.parents]
            grads = _OPS[node.op][1](node.adjoint, node.value, *values, **node.kwargs)
            for parent, grad in zip(node.parents, grads):
                if not isinstance(parent, Tensor) or not parent.requires_grad:
                    continue
                if callable(grad):
                    grad = grad()
                grad = _unbroadcast(grad, parent.value.shape)
                parent.adjoint = grad if parent.adjoint is None else parent.adjoint + grad

        for node in self.nodes:
            if node.adjoint is None:
                node.adjoint = np.zeros_like(node.value)

        gradients: Dict[Parameter, np.ndarray] = {}
        for node in self._param_nodes.values():
            node.param.grad += node.adjoint
            gradients[node.param] = node.adjoint
        return gradients


def _run_forward(op: str, index: int, values: Sequence[Any], kwargs: Dict[str, Any]) -> np.ndarray:
    try:
        return np.asarray(_OPS[op][0](*values, **kwargs), dtype=DTYPE)
    except ValueError as e:
        shapes = [np.shape(v) for v in values]
        raise ValueError(get_text('ad_shape_mismatch', index, op, shapes, e)) from e


def _apply(op: str, *args, **kwargs):
    """对 Tensor 记录节点；全是普通数组时直接计算"""
    tape = None
    for arg in args:
        if isinstance(arg, Tensor):
            if tape is None:
                tape = arg.tape
            elif arg.tape is not tape:
                raise ValueError(get_text('ad_mixed_tapes', op))
    if tape is None:
        return _OPS[op][0](*args, **kwargs)
    return tape.record(op, args, kwargs)


def add(a, b):
    return _apply('add', a, b)


def sub(a, b):
    return _apply('sub', a, b)


def mul(a, b):
    return _apply('mul', a, b)


def div(a, b):
    return _apply('div', a, b)


def neg(a):
    return _apply('neg', a)


def matmul(a, b):
    return _apply('matmul', a, b)


def exp(a):
    return _apply('exp', a)


def log(a):
    return _apply('log', a)


def square(a):
    return _apply('square', a)


def maximum(a, c):
    """max(a, c)，a 被截断处梯度为 0"""
    return _apply('maximum', a, c)


def minimum(a, c):
    return _apply('minimum', a, c)


def clip(a, low, high):
    return minimum(maximum(a, low), high)


def relu(a):
    return _apply('relu', a)


def tanh(a):
    return _apply('tanh', a)


def sigmoid(a):
    return _apply('sigmoid', a)


def sum_(a, axis=None, keepdims: bool = False):
    return _apply('sum', a, axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims: bool = False):
    return _apply('mean', a, axis=axis, keepdims=keepdims)


def logsumexp(a, axis=-1, keepdims: bool = False):
    """平移到最大值后求 ln Σ exp，-inf 项不参与"""
    return _apply('logsumexp', a, axis=axis, keepdims=keepdims)


def reshape(a, shape):
    return _apply('reshape', a, shape=tuple(shape))


def getitem(a, index):
    return _apply('getitem', a, index=index)


def value_of(x) -> np.ndarray:
    """取出数值（断开梯度）"""
    if isinstance(x, Tensor):
        return x.value
    return np.asarray(x, dtype=DTYPE)


def forward_eval(tape: Tape, inputs) -> List[np.ndarray]:
    return tape.forward_eval(inputs)


def backward(tape: Tape, seed_output: Tensor) -> Dict[Parameter, np.ndarray]:
    return tape.backward(seed_output)


def _as_scalar(x) -> float:
    return float(np.asarray(value_of(x)).reshape(-1)[0])


def _relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    if not (np.all(np.isfinite(analytic)) and np.all(np.isfinite(numeric))):
        return float('inf')
    if analytic.size == 0:
        return 0.0
    error = np.abs(analytic - numeric) / np.maximum(np.abs(analytic), floor)
    return float(np.max(error))


def grad_check(function: Callable, point: Any, step: float = 1e-5, floor: float = 1e-8) -> float:
    """
    比较解析梯度与中心差分

    Args:
        function: 标量函数，既能接收 Tensor 也能接收 numpy 数组
        point: 求导位置
        step: 差分步长
        floor: 相对误差分母的下限

    Returns:
        各坐标上 |解析 - 差分| / max(|解析|, floor) 的最大值；出现非有限值时为 inf
    """
    point = np.array(point, dtype=DTYPE)
    tape = Tape()
    x = tape.variable(point, name='x')
    tape.backward(function(x))
    analytic = x.adjoint

    numeric = np.zeros_like(point)
    for idx in np.ndindex(point.shape):
        plus = point.copy()
        minus = point.copy()
        plus[idx] += step
        minus[idx] -= step
        numeric[idx] = (_as_scalar(function(plus)) - _as_scalar(function(minus))) / (2.0 * step)
    return _relative_error(analytic, numeric, floor)


def grad_check_parameters(loss_fn: Callable[[Optional[Tape]], Any],
                          parameters: Sequence[Parameter], step: float = 1e-5,
                          floor: float = 1e-8) -> float:
    """
    对模型参数做梯度检查

    loss_fn(tape) 在 tape 为 None 时必须按纯数值方式计算同一个损失。
    """
    for p in parameters:
        p.zero_grad()
    tape = Tape()
    tape.backward(loss_fn(tape))
    analytic = [p.grad.copy() for p in parameters]

    worst = 0.0
    for p, grad in zip(parameters, analytic):
        numeric = np.zeros_like(p.value)
        for idx in np.ndindex(p.value.shape):
            original = p.value[idx]
            p.value[idx] = original + step
            f_plus = _as_scalar(loss_fn(None))
            p.value[idx] = original - step
            f_minus = _as_scalar(loss_fn(None))
            p.value[idx] = original
            numeric[idx] = (f_plus - f_minus) / (2.0 * step)
        worst = max(worst, _relative_error(grad, numeric, floor))
        p.zero_grad()
    return worst
