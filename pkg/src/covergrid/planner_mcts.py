"""Anytime per-robot tree search planner with bandit selection.

Each robot grows its own search tree under a fixed iteration budget per
decision. One iteration runs the four classic phases:

  selection        descend from the root, at each node moving to the child
                   with the highest UCT score, until a node with untried
                   actions (or at the horizon) is reached
  expansion        materialize one untried action, chosen uniformly
  simulation       forward-simulate from the root: the tree path first,
                   the default policy after, while peer robots replay their
                   published plans; score the trajectory
  backpropagation  store the score in the new leaf, then recompute each
                   ancestor value as the plain mean of its children

The trajectory score is a time-discounted sum over rollout steps k = 1..T:

    X = sum_k [ 1 / (t_k + 1)^2 * (p_k - c_hit * q_k - c_turn * r_k) ]

with t_k = 0.5 * k seconds from the rollout start, p_k = 1 when the robot
entered a never-covered cell, q_k = 1 when its advance was blocked, and
r_k = 1 when it turned (counted per the configured turn-penalty mode).

Unknown cells are treated as free during planning; only known obstacles
block and get penalized. Randomness is drawn from per-iteration splitmix64
streams derived from (decide seed, role, iteration), so a decision is a
pure function of its snapshot and seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid_world import (
    ACTIONS,
    DX,
    DY,
    KNOWN_OBSTACLE,
    LEFT,
    RIGHT,
    STRAIGHT,
    RobotState,
    turn,
)
from .rng import SplitMix64, mix64

# Turn penalty modes
TURN_NONE = 0
TURN_LEFT_ONLY = 1
TURN_RIGHT_ONLY = 2
TURN_BOTH = 3
TURN_MODE_NAMES = {"none": TURN_NONE, "left": TURN_LEFT_ONLY, "right": TURN_RIGHT_ONLY, "both": TURN_BOTH}
TURN_MODE_LABELS = {v: k for k, v in TURN_MODE_NAMES.items()}

# Stream roles for per-iteration rng derivation
_ROLE_EXPAND = 0
_ROLE_SELF = 1
_ROLE_PEER = 2


@dataclass(frozen=True)
class MctsConfig:
    """Tuning knobs. Config keys as used in files and on the CLI:
    cp, horizon, c_hit, c_turn, turn_mode, iters, wallclock_ms."""

    cp: float = 1.0
    horizon: int = 30
    c_hit: float = 2.0
    c_turn: float = 0.0
    turn_mode: int = TURN_NONE
    iters: int = 2000
    wallclock_ms: Optional[float] = None
    backprop: str = "child_mean"  # or "running_mean", for comparison runs
    engine: str = "auto"  # auto | python | numba

    def validate(self) -> None:
        if self.cp <= 0:
            raise ValueError("cp must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.iters < 1 and self.wallclock_ms is None:
            raise ValueError("iteration budget must be >= 1")
        if self.turn_mode not in (TURN_NONE, TURN_LEFT_ONLY, TURN_RIGHT_ONLY, TURN_BOTH):
            raise ValueError("bad turn_mode")
        if self.backprop not in ("child_mean", "running_mean"):
            raise ValueError("bad backprop rule")
        if self.engine not in ("auto", "python", "numba"):
            raise ValueError("bad engine")


_DISCOUNT_CACHE: dict[int, np.ndarray] = {}


def discount_table(horizon: int) -> np.ndarray:
    """discount[k] = 1 / (0.5 k + 1)^2 for k in 0..horizon (index 0 unused)."""
    table = _DISCOUNT_CACHE.get(horizon)
    if table is None:
        table = np.zeros(horizon + 1, dtype=np.float64)
        for k in range(1, horizon + 1):
            t1 = 0.5 * k + 1.0
            table[k] = 1.0 / (t1 * t1)
        table.setflags(write=False)
        _DISCOUNT_CACHE[horizon] = table
    return table


class TreeNode:
    """One robot state in the search tree."""

    __slots__ = ("state", "incoming_action", "depth", "parent", "children", "untried", "value", "visits")

    def __init__(self, state: RobotState, incoming_action: Optional[int], depth: int, parent: Optional["TreeNode"], horizon: int):
        self.state = state
        self.incoming_action = incoming_action
        self.depth = depth
        self.parent = parent
        self.children: list[Optional[TreeNode]] = [None, None, None]
        self.untried: list[int] = list(ACTIONS) if depth < horizon else []
        self.value = 0.0
        self.visits = 0

    def existing_children(self) -> list["TreeNode"]:
        return [c for c in self.children if c is not None]

    def path_from_root(self) -> list[int]:
        actions: list[int] = []
        node = self
        while node.parent is not None:
            actions.append(node.incoming_action)
            node = node.parent
        actions.reverse()
        return actions


def uct_score(x: float, n: int, n_j: int, c_p: float) -> float:
    """Bandit score: x + 2 c_p sqrt(2 ln n / n_j); +inf for unvisited nodes."""
    if n_j == 0:
        return math.inf
    return x + 2.0 * c_p * math.sqrt(2.0 * math.log(n) / n_j)


def expand(node: TreeNode, known: np.ndarray, rng: SplitMix64, horizon: int) -> TreeNode:
    """Materialize one uniformly random untried action. The child state is
    the action applied against the known map (unknown treated as free)."""
    idx = rng.randrange(len(node.untried))
    action = node.untried.pop(idx)
    h, w = known.shape
    state, _ = _apply(node.state, action, w, h, known)
    child = TreeNode(state, action, node.depth + 1, node, horizon)
    node.children[action] = child
    return child


def _apply(state: RobotState, action: int, w: int, h: int, known: np.ndarray) -> tuple[RobotState, bool]:
    nh = turn(state.heading, action)
    tx, ty = state.x + DX[nh], state.y + DY[nh]
    if 0 <= tx < w and 0 <= ty < h and known[ty, tx] != KNOWN_OBSTACLE:
        return RobotState(tx, ty, nh), True
    return RobotState(state.x, state.y, nh), False


def default_policy(state: RobotState, known: np.ndarray, is_covered: Callable[[int, int], bool], rng: SplitMix64) -> int:
    """Sweep-ahead heuristic used beyond the tree path.

    Straight while the cell ahead is passable and uncovered; otherwise turn
    toward the single qualifying side cell, pick a random turn when both
    sides qualify, and when neither does: straight if ahead is passable,
    random turn if it is a wall. "Occupied" means out of bounds or a known
    obstacle; unknown cells count as free.
    """
    h_, w_ = known.shape

    def occupied(x: int, y: int) -> bool:
        return not (0 <= x < w_ and 0 <= y < h_) or known[y, x] == KNOWN_OBSTACLE

    def qualifies(x: int, y: int) -> bool:
        return not occupied(x, y) and not is_covered(x, y)

    ah = state.heading
    ax, ay = state.x + DX[ah], state.y + DY[ah]
    if qualifies(ax, ay):
        return STRAIGHT
    lh = turn(state.heading, LEFT)
    rh = turn(state.heading, RIGHT)
    left_ok = qualifies(state.x + DX[lh], state.y + DY[lh])
    right_ok = qualifies(state.x + DX[rh], state.y + DY[rh])
    if left_ok and right_ok:
        return LEFT if (rng.next_u64() & 1) == 0 else RIGHT
    if left_ok:
        return LEFT
    if right_ok:
        return RIGHT
    if occupied(ax, ay):
        return LEFT if (rng.next_u64() & 1) == 0 else RIGHT
    return STRAIGHT


def evaluate(p: Sequence[int], q: Sequence[int], r: Sequence[int], c_hit: float = 2.0, c_turn: float = 0.0) -> float:
    """Discounted trajectory score over per-step flags (index 0 is step 1)."""
    T = len(p)
    disc = discount_table(T)
    x = 0.0
    for k in range(1, T + 1):
        val = float(p[k - 1]) - c_hit * float(q[k - 1]) - c_turn * float(r[k - 1])
        x += disc[k] * val
    return x


def evaluate_coverage(p: Sequence[int], q: Sequence[int], c_hit: float = 2.0) -> float:
    """Coverage-only score (no turn term); the baseline objective."""
    T = len(p)
    disc = discount_table(T)
    x = 0.0
    for k in range(1, T + 1):
        val = float(p[k - 1]) - c_hit * float(q[k - 1]) - 0.0
        x += disc[k] * val
    return x


@dataclass
class RolloutOutcome:
    p: tuple[int, ...]
    q: tuple[int, ...]
    r: tuple[int, ...]
    value: float


@dataclass
class PeerPlan:
    """A peer robot's pose and its published plan (may be empty)."""

    robot_id: int
    state: RobotState
    path: tuple[int, ...]


@dataclass
class RolloutStreams:
    self_rng: SplitMix64
    peer_rngs: dict[int, SplitMix64] = field(default_factory=dict)


def make_streams(decide_seed: int, iteration: int, peer_ids: Sequence[int]) -> RolloutStreams:
    return RolloutStreams(
        self_rng=SplitMix64(mix64(decide_seed, _ROLE_SELF, iteration)),
        peer_rngs={pid: SplitMix64(mix64(decide_seed, _ROLE_PEER, pid, iteration)) for pid in peer_ids},
    )


def rollout(
    leaf: TreeNode,
    root_state: RobotState,
    known: np.ndarray,
    covered: np.ndarray,
    peers: Sequence[PeerPlan],
    cfg: MctsConfig,
    streams: RolloutStreams,
) -> RolloutOutcome:
    """Simulate steps 1..horizon from the root state.

    The first ``leaf.depth`` self actions replay the tree path into the
    leaf; the rest come from the default policy. At each step the peers
    move first (their published plan, then the default policy once it is
    exhausted) and the cells they enter join the local covered overlay.
    """
    T = cfg.horizon
    h_, w_ = known.shape
    path = leaf.path_from_root()
    d = len(path)

    overlay: set[tuple[int, int]] = set()

    def is_covered(x: int, y: int) -> bool:
        return bool(covered[y, x]) or (x, y) in overlay

    peer_pose = [(pp.state.x, pp.state.y, pp.state.heading) for pp in peers]
    x, y, hd = root_state.x, root_state.y, root_state.heading

    p_flags: list[int] = []
    q_flags: list[int] = []
    r_flags: list[int] = []

    for k in range(1, T + 1):
        # Peers advance first, in robot-id order.
        for j, plan in enumerate(peers):
            px, py, ph = peer_pose[j]
            if k - 1 < len(plan.path):
                a = plan.path[k - 1]
            else:
                a = default_policy(RobotState(px, py, ph), known, is_covered, streams.peer_rngs[plan.robot_id])
            nh = turn(ph, a)
            tx, ty = px + DX[nh], py + DY[nh]
            blocked = not (0 <= tx < w_ and 0 <= ty < h_) or known[ty, tx] == KNOWN_OBSTACLE
            if not blocked:
                if (tx, ty) == (x, y):
                    blocked = True
                else:
                    for jj, pose in enumerate(peer_pose):
                        if jj != j and (pose[0], pose[1]) == (tx, ty):
                            blocked = True
                            break
            if blocked:
                peer_pose[j] = (px, py, nh)
            else:
                peer_pose[j] = (tx, ty, nh)
                if not covered[ty, tx]:
                    overlay.add((tx, ty))

        # Self moves.
        if k - 1 < d:
            a = path[k - 1]
        else:
            a = default_policy(RobotState(x, y, hd), known, is_covered, streams.self_rng)
        hd = turn(hd, a)
        tx, ty = x + DX[hd], y + DY[hd]
        blocked = not (0 <= tx < w_ and 0 <= ty < h_) or known[ty, tx] == KNOWN_OBSTACLE
        if not blocked:
            for pose in peer_pose:
                if (pose[0], pose[1]) == (tx, ty):
                    blocked = True
                    break
        pk = 0
        qk = 1 if blocked else 0
        if not blocked:
            x, y = tx, ty
            if not covered[y, x] and (x, y) not in overlay:
                pk = 1
                overlay.add((x, y))
        rk = 0
        if a == LEFT and cfg.turn_mode in (TURN_LEFT_ONLY, TURN_BOTH):
            rk = 1
        elif a == RIGHT and cfg.turn_mode in (TURN_RIGHT_ONLY, TURN_BOTH):
            rk = 1
        p_flags.append(pk)
        q_flags.append(qk)
        r_flags.append(rk)

    value = evaluate(p_flags, q_flags, r_flags, cfg.c_hit, cfg.c_turn)
    return RolloutOutcome(tuple(p_flags), tuple(q_flags), tuple(r_flags), value)


def backpropagate(leaf: TreeNode, value: float, rule: str = "child_mean") -> None:
    """Store the rollout value in the leaf, then update ancestors: visit
    counts always increment; values follow the configured rule."""
    leaf.value = value
    leaf.visits += 1
    node = leaf.parent
    while node is not None:
        node.visits += 1
        if rule == "child_mean":
            total = 0.0
            count = 0
            for child in node.children:
                if child is not None:
                    total += child.value
                    count += 1
            node.value = total / count
        else:  # running_mean
            node.value += (value - node.value) / node.visits
        node = node.parent
    # leaf itself already holds the raw value


def best_root_action(root: TreeNode) -> int:
    """Root child action with maximal value; ties to the lowest action."""
    best_action = None
    best_value = -math.inf
    for action in ACTIONS:
        child = root.children[action]
        if child is not None and child.value > best_value:
            best_value = child.value
            best_action = action
    if best_action is None:
        raise RuntimeError("decide ran with no expanded root children")
    return best_action


def greedy_path(node: TreeNode) -> tuple[int, ...]:
    """Max-value descent from a node; the plan published to peers."""
    actions: list[int] = []
    while True:
        best = None
        best_value = -math.inf
        for action in ACTIONS:
            child = node.children[action]
            if child is not None and child.value > best_value:
                best_value = child.value
                best = child
        if best is None:
            return tuple(actions)
        actions.append(best.incoming_action)
        node = best


def _best_uct_child(node: TreeNode, cp: float) -> Optional[TreeNode]:
    best = None
    best_score = -math.inf
    for action in ACTIONS:
        child = node.children[action]
        if child is None:
            continue
        score = uct_score(child.value, node.visits, child.visits, cp)
        if score > best_score:
            best_score = score
            best = child
    return best


def select(root: TreeNode, cp: float, horizon: int) -> TreeNode:
    """Descend by max-UCT until the first node with untried actions or one
    at the horizon. Ties break toward the lowest action index (S < L < R)."""
    node = root
    while not node.untried and node.depth < horizon:
        nxt = _best_uct_child(node, cp)
        if nxt is None:
            return node
        node = nxt
    return node


def decide_python(
    root: TreeNode,
    known: np.ndarray,
    covered: np.ndarray,
    peers: Sequence[PeerPlan],
    cfg: MctsConfig,
    decide_seed: int,
) -> tuple[int, tuple[int, ...], TreeNode]:
    """Reference decision loop. Returns (action, published plan, new root)."""
    peer_ids = [pp.robot_id for pp in peers]
    root_state = root.state
    deadline = None
    if cfg.wallclock_ms is not None:
        deadline = time.monotonic() + cfg.wallclock_ms / 1000.0
    it = 0
    while True:
        if deadline is None:
            if it >= cfg.iters:
                break
        elif it > 0 and time.monotonic() >= deadline:
            break
        node = select(root, cfg.cp, cfg.horizon)
        if node.untried and node.depth < cfg.horizon:
            exp_rng = SplitMix64(mix64(decide_seed, _ROLE_EXPAND, it))
            node = expand(node, known, exp_rng, cfg.horizon)
        streams = make_streams(decide_seed, it, peer_ids)
        outcome = rollout(node, root_state, known, covered, peers, cfg, streams)
        backpropagate(node, outcome.value, cfg.backprop)
        it += 1
    action = best_root_action(root)
    new_root = root.children[action]
    new_root.parent = None
    new_root.incoming_action = None
    plan = greedy_path(new_root)
    return action, plan, new_root


class MctsPlanner:
    """Team adapter: one private search tree per robot.

    Trees are grown against immutable snapshots; the chosen child's subtree
    is kept as the next root and invalidated whenever the robot's actual
    state diverges from the prediction (a blocked move the planner did not
    anticipate).
    """

    def __init__(
        self,
        n_robots: int,
        cfg: MctsConfig = MctsConfig(),
        seed: int = 0,
        diagnostics: Optional[Callable[[str], None]] = None,
    ):
        cfg.validate()
        self.cfg = cfg
        self.seed = seed
        self.n_robots = n_robots
        self.diagnostics = diagnostics
        self._trees: list[Optional[TreeNode]] = [None] * n_robots
        self._fast: list = [None] * n_robots
        self._engine = self._pick_engine(cfg.engine)

    @staticmethod
    def _pick_engine(requested: str) -> str:
        if requested == "python":
            return "python"
        try:
            from . import _mcts_fast  # noqa: F401
            return "numba"
        except Exception:
            if requested == "numba":
                raise
            return "python"

    def begin_epoch(self, snap) -> None:
        pass

    def decide(self, robot_id: int, snap) -> tuple[int, tuple[int, ...]]:
        me = snap.robots[robot_id]
        peers = [
            PeerPlan(j, snap.robots[j], tuple(snap.published_paths[j]))
            for j in range(len(snap.robots))
            if j != robot_id
        ]
        decide_seed = mix64(self.seed, robot_id, snap.epoch)
        if self._engine == "numba":
            return self._decide_fast(robot_id, me, snap, peers, decide_seed)
        root = self._trees[robot_id]
        if root is None or root.state != me:
            root = TreeNode(me, None, 0, None, self.cfg.horizon)
        else:
            root.depth = 0
            _rebase_depths(root, self.cfg.horizon)
        action, plan, new_root = decide_python(root, snap.known, snap.covered, peers, self.cfg, decide_seed)
        if self.diagnostics is not None:
            self._emit_diag(robot_id, snap.epoch, root, action)
        self._trees[robot_id] = new_root
        return action, plan

    def _decide_fast(self, robot_id, me, snap, peers, decide_seed):
        from . import _mcts_fast

        tree = self._fast[robot_id]
        if tree is None:
            tree = _mcts_fast.FastTree(self.cfg, snap.known.shape)
            self._fast[robot_id] = tree
        action, plan, root_values = tree.decide(me, snap.known, snap.covered, peers, decide_seed)
        if self.diagnostics is not None:
            vals = " ".join(f"{n}={v:.6f}" for n, v in root_values)
            self.diagnostics(f"robot={robot_id} epoch={snap.epoch} iters={self.cfg.iters} {vals} chose={action}")
        return action, plan

    def _emit_diag(self, robot_id: int, epoch: int, root: TreeNode, action: int) -> None:
        parts = []
        for a in ACTIONS:
            child = root.children[a]
            if child is not None:
                parts.append(f"{a}={child.value:.6f}")
        self.diagnostics(
            f"robot={robot_id} epoch={epoch} iters={root.visits} {' '.join(parts)} chose={action}"
        )


def _rebase_depths(root: TreeNode, horizon: int) -> None:
    """After promoting a subtree, renumber depths from the new root and
    reopen untried actions on nodes that used to sit at the horizon."""
    stack = [root]
    while stack:
        node = stack.pop()
        if node.depth < horizon:
            node.untried = [a for a in ACTIONS if node.children[a] is None]
        else:
            node.untried = []
        for child in node.children:
            if child is not None:
                child.depth = node.depth + 1
                stack.append(child)
