"""Sandboxed execution of vetted job code inside a transient airlock.

The runner contract: the job process sees exactly three directories
(read-only data, scratch workspace, output), receives them via the
AIRLOCK_DATA_DIR / AIRLOCK_WORK_DIR / AIRLOCK_OUTPUT_DIR environment
variables, gets stdin closed and stdout/stderr captured, may not create
sockets, and runs under CPU, memory, and wall-clock limits. Exit 0 means
success.

Two conforming implementations:
  * ProcessRunner — subprocess isolation for desk scale. With root
    privileges each concurrent airlock slot runs under its own
    unprivileged uid/gid, which is what makes the read-only data area and
    cross-airlock denial kernel-enforced. Without root the same layout is
    kept but enforcement degrades to permission bits under one uid
    (documented limitation).
  * ContainerRunnerStub — maps the same contract onto a container engine
    invocation for production parity; it builds the engine argv but does
    not execute it.
"""

from __future__ import annotations

import os
import resource
import shutil
import signal
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

from .canonical import ts_now
from .errors import RunnerFailure

BASE_UID = 61000  # slot n runs as uid/gid BASE_UID + n when the service is root
LOG_CAP_BYTES = 10 * 1024 * 1024
FSIZE_CAP_BYTES = 256 * 1024 * 1024

# Fixed allow-list of runtimes a job may name; jobs cannot supply images or
# interpreter paths. Each entry builds the argv for a given entrypoint.
RUNTIME_CATALOGUE: dict[str, "RuntimeSpec"] = {}


@dataclass(frozen=True)
class RuntimeSpec:
    runtime_ref: str
    description: str
    container_image: str

    def argv(self, entry_path: str) -> list[str]:
        return [sys.executable, "-B", entry_path]


def _register_runtimes() -> None:
    RUNTIME_CATALOGUE["python3-batch"] = RuntimeSpec(
        runtime_ref="python3-batch",
        description="CPython batch runtime, standard library only",
        container_image="python:3.10-slim",
    )


_register_runtimes()


@dataclass(frozen=True)
class RunnerLimits:
    cpu_cores: int
    memory_mb: int
    max_runtime_s: int


@dataclass(frozen=True)
class RunResult:
    exit_status: int  # negative = killed by that signal number
    timed_out: bool
    log_text: str
    started_at: str
    finished_at: str


GUARD_SOURCE = '''\
"""Injected before job code runs: refuse socket creation in-process."""
import socket as _socket


class _DeniedSocket(_socket.socket):
    # stdlib modules subclass socket.socket at import time, so this must
    # stay a class; only instantiation is refused
    def __init__(self, *_args, **_kwargs):
        raise PermissionError("network access is denied inside the airlock")


def _denied(*_args, **_kwargs):
    raise PermissionError("network access is denied inside the airlock")


_socket.socket = _DeniedSocket
_socket.create_connection = _denied
_socket.socketpair = _denied
_socket.create_server = _denied
'''


@dataclass(frozen=True)
class AirlockDirs:
    root: Path
    data: Path
    work: Path
    output: Path
    guard: Path
    log: Path


def prepare_airlock_dirs(root: Path, slot: int) -> AirlockDirs:
    """Build one airlock's directory set with per-slot ownership.

    Layout under a random-named root: data/ (read-only to the job),
    work/ and output/ (job-writable), guard/ (interpreter guard, read-only),
    run.log (runner-owned capture target). When running as root, the root
    directory is traversable only by the slot's own group, so one airlock
    cannot reach into another.
    """
    root.mkdir(parents=True)
    dirs = AirlockDirs(
        root=root,
        data=root / "data",
        work=root / "work",
        output=root / "output",
        guard=root / "guard",
        log=root / "run.log",
    )
    for sub in (dirs.data, dirs.work, dirs.output, dirs.guard):
        sub.mkdir()
    (dirs.guard / "sitecustomize.py").write_text(GUARD_SOURCE)
    dirs.log.touch()
    if os.geteuid() == 0:
        uid = gid = BASE_UID + slot
        os.chown(root, 0, gid)
        root.chmod(0o750)
        for sub in (dirs.data, dirs.guard):
            os.chown(sub, 0, gid)
            sub.chmod(0o750)
        for sub in (dirs.work, dirs.output):
            os.chown(sub, uid, gid)
            sub.chmod(0o700)
    else:
        root.chmod(0o700)
    return dirs


def lock_data_dir(dirs: AirlockDirs, slot: int) -> None:
    """Make the populated data area read-only to the job."""
    for path in sorted(dirs.data.rglob("*")):
        if os.geteuid() == 0:
            os.chown(path, 0, BASE_UID + slot)
            path.chmod(0o750 if path.is_dir() else 0o640)
        else:
            path.chmod(0o500 if path.is_dir() else 0o400)
    if os.geteuid() != 0:
        dirs.data.chmod(0o500)


def destroy_airlock_dirs(dirs: AirlockDirs) -> None:
    """Remove every trace of the airlock, tolerating job-made chmod games."""
    if not dirs.root.exists():
        return
    for path in sorted(dirs.root.rglob("*"), reverse=True):
        try:
            if path.is_dir() and not path.is_symlink():
                path.chmod(0o700)
        except OSError:
            pass
    shutil.rmtree(dirs.root, ignore_errors=True)
    if dirs.root.exists():
        raise RunnerFailure(f"airlock directory {dirs.root} survived destruction")


class ProcessRunner:
    """Subprocess-based conforming runner (desk scale)."""

    def __init__(self, log_cap_bytes: int = LOG_CAP_BYTES):
        self.log_cap_bytes = log_cap_bytes

    def run(
        self,
        argv: list[str],
        dirs: AirlockDirs,
        limits: RunnerLimits,
        slot: int = 0,
    ) -> RunResult:
        env = {
            "PATH": "/usr/local/bin:/usr/bin:/bin",
            "HOME": str(dirs.work),
            "TMPDIR": str(dirs.work),
            "LANG": "C.UTF-8",
            "PYTHONPATH": str(dirs.guard),
            "PYTHONDONTWRITEBYTECODE": "1",
            "AIRLOCK_DATA_DIR": str(dirs.data),
            "AIRLOCK_WORK_DIR": str(dirs.work),
            "AIRLOCK_OUTPUT_DIR": str(dirs.output),
        }
        started_at = ts_now()

        def _confine():
            os.setsid()
            # RLIMIT_DATA, not RLIMIT_AS: the limit is installed between
            # fork and exec, while the child still carries the parent's
            # full address space; an AS cap below that would kill the child
            # before exec. DATA only constrains new heap/anon mappings, so
            # it bites on the fresh job image instead.
            resource.setrlimit(
                resource.RLIMIT_DATA,
                (limits.memory_mb * 1024 * 1024, limits.memory_mb * 1024 * 1024),
            )
            resource.setrlimit(
                resource.RLIMIT_CPU,
                (limits.max_runtime_s, limits.max_runtime_s + 5),
            )
            resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
            resource.setrlimit(
                resource.RLIMIT_FSIZE, (FSIZE_CAP_BYTES, FSIZE_CAP_BYTES)
            )
            cpu_count = os.cpu_count() or 1
            os.sched_setaffinity(
                0, set(range(min(limits.cpu_cores, cpu_count)))
            )
            if os.geteuid() == 0:
                uid = gid = BASE_UID + slot
                os.setgroups([])
                os.setgid(gid)
                os.setuid(uid)

        with open(dirs.log, "ab") as log_fh:
            try:
                proc = subprocess.Popen(
                    argv,
                    cwd=dirs.work,
                    env=env,
                    stdin=subprocess.DEVNULL,
                    stdout=log_fh,
                    stderr=subprocess.STDOUT,
                    preexec_fn=_confine,
                )
            except (OSError, subprocess.SubprocessError) as exc:
                raise RunnerFailure(f"failed to launch job process: {exc}") from exc
            timed_out = False
            try:
                exit_status = proc.wait(timeout=limits.max_runtime_s)
            except subprocess.TimeoutExpired:
                timed_out = True
                try:
                    os.killpg(proc.pid, signal.SIGKILL)
                except ProcessLookupError:
                    pass
                exit_status = proc.wait()
        finished_at = ts_now()
        raw_log = dirs.log.read_bytes()[: self.log_cap_bytes]
        log_text = raw_log.decode("utf-8", errors="replace")
        if timed_out:
            log_text += (
                f"\n[runner] wall clock limit of {limits.max_runtime_s}s exceeded; "
                "process group killed\n"
            )
        return RunResult(
            exit_status=exit_status,
            timed_out=timed_out,
            log_text=log_text,
            started_at=started_at,
            finished_at=finished_at,
        )


class ContainerRunnerStub:
    """Production-parity mapping of the runner contract onto a container engine.

    Builds the exact engine invocation (no network, read-only data bind,
    memory/CPU/pids limits, scrubbed environment) but never executes it;
    desk-scale deployments use ProcessRunner instead.
    """

    def __init__(self, engine: str = "docker"):
        self.engine = engine

    def build_argv(
        self,
        runtime: RuntimeSpec,
        dirs: AirlockDirs,
        limits: RunnerLimits,
        entry_rel: str,
    ) -> list[str]:
        return [
            self.engine, "run", "--rm",
            "--network=none",
            "--read-only",
            "--cap-drop=ALL",
            "--security-opt", "no-new-privileges",
            f"--memory={limits.memory_mb}m",
            f"--cpus={limits.cpu_cores}",
            "--pids-limit=64",
            "-v", f"{dirs.data}:/airlock/data:ro",
            "-v", f"{dirs.work}:/airlock/work:rw",
            "-v", f"{dirs.output}:/airlock/output:rw",
            "-e", "AIRLOCK_DATA_DIR=/airlock/data",
            "-e", "AIRLOCK_WORK_DIR=/airlock/work",
            "-e", "AIRLOCK_OUTPUT_DIR=/airlock/output",
            "--workdir", "/airlock/work",
            runtime.container_image,
            "timeout", str(limits.max_runtime_s),
            "python3", "-B", f"/airlock/work/{entry_rel}",
        ]

    def run(self, *_args, **_kwargs) -> RunResult:
        raise RunnerFailure(
            "container execution is a production deployment concern; "
            "build_argv supplies the invocation for your engine"
        )
