"""Kernel backend parity and selection."""

import random
import subprocess
import sys

import pytest

from setoff import kernel
from setoff._mincost import solve as python_solve


def random_instance(seed: int):
    rng = random.Random(seed)
    n = rng.randint(0, 6)
    arcs = []
    if n >= 2:
        for _ in range(rng.randint(0, 8)):
            tail = rng.randrange(n)
            head = rng.randrange(n)
            if tail != head:
                arcs.append((tail, head, rng.randint(1, 10)))
    n_stages = rng.randint(0, 2) if n else 0
    t_ptr, t_node, t_cap = [0], [], []
    a_ptr, a_node, a_cap = [0], [], []
    for _ in range(n_stages):
        for _ in range(rng.randint(0, 3)):
            t_node.append(rng.randrange(n))
            t_cap.append(rng.randint(0, 10))
        for _ in range(rng.randint(0, 3)):
            a_node.append(rng.randrange(n))
            a_cap.append(rng.choice([-1, rng.randint(0, 10)]))
        t_ptr.append(len(t_node))
        a_ptr.append(len(a_node))
    budget = rng.choice([-1, rng.randint(0, 15)])
    return (
        n,
        [a[0] for a in arcs],
        [a[1] for a in arcs],
        [a[2] for a in arcs],
        t_ptr, t_node, t_cap,
        a_ptr, a_node, a_cap,
        budget,
    )


needs_compiled = pytest.mark.skipif(
    "compiled" not in kernel.available_backends(),
    reason="compiled kernel not built",
)


def test_python_backend_always_available() -> None:
    assert "python" in kernel.available_backends()


def test_set_backend_round_trip() -> None:
    before = kernel.get_backend()
    try:
        kernel.set_backend("python")
        assert kernel.get_backend() == "python"
    finally:
        kernel.set_backend(before)
    with pytest.raises(ValueError):
        kernel.set_backend("quantum")


def test_kernel_postconditions_random() -> None:
    for seed in range(60):
        inst = random_instance(seed)
        (n, ob_tail, ob_head, ob_cap, t_ptr, t_node, t_cap,
         a_ptr, a_node, a_cap, budget) = inst
        cycle, final, tender, accept, stage_liq = python_solve(*inst)
        for flow, cap in zip(cycle, ob_cap):
            assert 0 <= flow <= cap
        for flow, cap in zip(final, ob_cap):
            assert 0 <= flow <= cap
        for flow, cap in zip(tender, t_cap):
            assert 0 <= flow <= cap
        for flow, cap in zip(accept, a_cap):
            assert 0 <= flow
            if cap != -1:
                assert flow <= cap
        for s in range(len(t_ptr) - 1):
            t_total = sum(tender[t_ptr[s]:t_ptr[s + 1]])
            a_total = sum(accept[a_ptr[s]:a_ptr[s + 1]])
            assert t_total == a_total == stage_liq[s]
        if budget != -1:
            assert sum(stage_liq) <= budget


@needs_compiled
def test_backend_parity_random() -> None:
    compiled_solve = kernel.available_backends()["compiled"].solve
    for seed in range(120):
        inst = random_instance(seed)
        assert compiled_solve(*inst) == python_solve(*inst), f"seed {seed}"


@needs_compiled
def test_backend_parity_empty_graph() -> None:
    compiled_solve = kernel.available_backends()["compiled"].solve
    empty = (0, [], [], [], [0], [], [], [0], [], [], -1)
    assert compiled_solve(*empty) == python_solve(*empty) == ([], [], [], [], [])


def test_solve_min_cost_dispatches_to_active_backend() -> None:
    before = kernel.get_backend()
    inst = random_instance(3)
    try:
        kernel.set_backend("python")
        assert kernel.solve_min_cost(*inst) == python_solve(*inst)
    finally:
        kernel.set_backend(before)


def test_env_forces_python_backend() -> None:
    out = subprocess.run(
        [sys.executable, "-c",
         "from setoff import kernel; print(kernel.get_backend())"],
        env={"SETOFF_KERNEL": "python", "PATH": "/usr/bin:/bin"},
        capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_env_rejects_unknown_backend() -> None:
    out = subprocess.run(
        [sys.executable, "-c", "import setoff.kernel"],
        env={"SETOFF_KERNEL": "fortran", "PATH": "/usr/bin:/bin"},
        capture_output=True, text=True,
    )
    assert out.returncode != 0
    assert "ImportError" in out.stderr
