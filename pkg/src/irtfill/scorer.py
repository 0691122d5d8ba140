"""AI-grader abstraction: protocol, synthetic noisy grader, external clients.

A Scorer maps a ScoreRequest (one learner answer on one item) to a
predicted category. The synthetic scorer perturbs hidden true scores
with Gaussian noise so simulations can dial grading accuracy; external
scorers speak newline-delimited JSON over a subprocess's stdio or HTTP
POST.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from .errors import (
    BatchScoreError,
    CalibrationError,
    CategoryRangeError,
    ScorerProtocolError,
    ScorerTransportError,
    ShapeError,
)
from .metrics import qwk
from .model import ScoreMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreRequest:
    item_id: str
    learner_id: str
    n_categories: int
    answer_text: Optional[str] = None
    prompt: Optional[str] = None
    rubric: Optional[str] = None
    reference_answer: Optional[str] = None

    def __post_init__(self):
        if self.n_categories < 2:
            raise CategoryRangeError(f"K must be >= 2, got {self.n_categories}")

    def to_wire(self) -> dict:
        return {
            "item_id": self.item_id,
            "learner_id": self.learner_id,
            "answer_text": self.answer_text,
            "prompt": self.prompt,
            "rubric": self.rubric,
            "reference_answer": self.reference_answer,
            "n_categories": self.n_categories,
        }


@dataclass(frozen=True)
class ScoreResponse:
    item_id: str
    learner_id: str
    predicted: int
    raw_output: Optional[str] = None


@runtime_checkable
class Scorer(Protocol):
    max_in_flight: int
    requires_text: bool

    def score(self, request: ScoreRequest) -> ScoreResponse: ...


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class SyntheticScorerConfig:
    noise_sigma: float = 0.0
    seed: int = 0
    target_qwk: Optional[float] = None

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ShapeError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


class SyntheticScorer:
    """Grades from hidden true scores: clamp(round(true + N(0, sigma^2))).

    Per-cell RNG streams derive from (seed, item, learner), so results
    do not depend on call order.
    """

    requires_text = False
    max_in_flight = 8

    def __init__(self, truth: ScoreMatrix, config: SyntheticScorerConfig):
        if not truth.is_complete:
            raise ShapeError("synthetic scorer needs a complete truth matrix")
        self.truth = truth
        self.config = config

    def score(self, request: ScoreRequest) -> ScoreResponse:
        i, j = int(request.item_id), int(request.learner_id)
        true_score = self.truth.values[i, j]
        K = request.n_categories
        sigma = self.config.noise_sigma
        if sigma == 0.0:
            predicted = int(true_score)
        else:
            rng = np.random.default_rng((self.config.seed, i, j))
            predicted = _round_half_up(true_score + sigma * rng.standard_normal())
            predicted = int(np.clip(predicted, 1, K))
        return ScoreResponse(request.item_id, request.learner_id, predicted)


def calibrate_sigma(
    target_qwk: float,
    n_categories: int,
    true_score_dist,
    seed: int = 0,
    n_draws: int = 200_000,
    tol: float = 0.02,
    sigma_max: float = 3.0,
) -> float:
    """Bisect for the noise level whose Monte-Carlo QWK hits the target.

    true_score_dist is a length-K histogram (counts or probabilities).
    Common random numbers make the achieved QWK monotone in sigma.
    """
    if not 0.0 < target_qwk <= 1.0:
        raise ShapeError(f"target_qwk must be in (0, 1], got {target_qwk}")
    dist = np.asarray(true_score_dist, dtype=float)
    if dist.size != n_categories or dist.sum() <= 0 or (dist < 0).any():
        raise ShapeError("true_score_dist must be a nonnegative length-K histogram")
    dist = dist / dist.sum()
    rng = np.random.default_rng(seed)
    truth = rng.choice(np.arange(1, n_categories + 1), size=n_draws, p=dist)
    noise = rng.standard_normal(n_draws)

    def achieved(sigma: float) -> float:
        pred = np.clip(np.floor(truth + sigma * noise + 0.5), 1, n_categories)
        return qwk(truth, pred.astype(np.int64), n_categories)

    if target_qwk == 1.0:
        return 0.0
    floor_qwk = achieved(sigma_max)
    if target_qwk < floor_qwk - tol:
        raise CalibrationError(
            f"target QWK {target_qwk} unreachable; achievable range is "
            f"[{floor_qwk:.3f}, 1.0] for sigma in [0, {sigma_max}]"
        )
    lo, hi = 0.0, sigma_max
    for _ in range(60):
        mid = (lo + hi) / 2.0
        got = achieved(mid)
        if abs(got - target_qwk) <= tol / 2:
            return mid
        if got > target_qwk:
            lo = mid
        else:
            hi = mid
    mid = (lo + hi) / 2.0
    if abs(achieved(mid) - target_qwk) > tol:
        raise CalibrationError(
            f"bisection failed to reach QWK {target_qwk} within {tol}"
        )
    return mid


def _parse_prediction(payload: dict, K: int, raw_line: str) -> ScoreResponse:
    if "error" in payload:
        raise ScorerProtocolError(
            f"scorer reported error: {payload['error']}", raw_output=raw_line
        )
    try:
        predicted = int(str(payload["predicted"]).strip())
    except (KeyError, TypeError, ValueError) as exc:
        raise ScorerProtocolError(
            f"unusable scorer response: {raw_line!r}", raw_output=raw_line
        ) from exc
    if not 1 <= predicted <= K:
        log.warning("scorer prediction %d outside [1, %d]; clamping", predicted, K)
        predicted = int(np.clip(predicted, 1, K))
    return ScoreResponse(
        item_id=payload.get("item_id", ""),
        learner_id=payload.get("learner_id", ""),
        predicted=predicted,
        raw_output=payload.get("raw_output", raw_line),
    )


class ExecScorer:
    """Client for a scorer subprocess speaking NDJSON on stdio."""

    requires_text = True
    max_in_flight = 1

    def __init__(self, command: str):
        self.command = command
        self._proc = None

    def _ensure_proc(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def score(self, request: ScoreRequest) -> ScoreResponse:
        proc = self._ensure_proc()
        try:
            proc.stdin.write(json.dumps(request.to_wire()) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerTransportError(f"scorer subprocess I/O failed: {exc}") from exc
        if not line:
            self._proc = None
            raise ScorerTransportError("scorer subprocess closed its output")
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScorerProtocolError(
                f"scorer emitted invalid JSON: {line!r}", raw_output=line
            ) from exc
        return _parse_prediction(payload, request.n_categories, line.rstrip("\n"))

    def close(self):
        if self._proc is not None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
            self._proc = None


class HttpScorer:
    """Client for a scorer behind HTTP POST (one request body per call)."""

    requires_text = True
    max_in_flight = 4

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def score(self, request: ScoreRequest) -> ScoreResponse:
        try:
            resp = requests.post(self.url, json=request.to_wire(), timeout=self.timeout)
        except requests.RequestException as exc:
            raise ScorerTransportError(f"HTTP scorer unreachable: {exc}") from exc
        if resp.status_code >= 500:
            raise ScorerTransportError(f"HTTP scorer returned {resp.status_code}")
        if resp.status_code >= 400:
            raise ScorerProtocolError(
                f"HTTP scorer rejected request ({resp.status_code})",
                raw_output=resp.text,
            )
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ScorerProtocolError(
                f"HTTP scorer emitted invalid JSON: {resp.text!r}",
                raw_output=resp.text,
            ) from exc
        return _parse_prediction(payload, request.n_categories, resp.text)


def batch_score(
    requests_list: Sequence[ScoreRequest],
    scorer,
    max_in_flight: Optional[int] = None,
    max_attempts: int = 3,
    retry_base_delay: float = 0.1,
) -> list:
    """Score a batch, preserving request order, with per-request retries
    on transport errors. Raises BatchScoreError listing cells that still
    failed after retries."""
    if max_in_flight is None:
        max_in_flight = getattr(scorer, "max_in_flight", 1)
    if max_in_flight < 1:
        raise ShapeError("max_in_flight must be >= 1")
    if not requests_list:
        return []

    def one(req: ScoreRequest):
        for attempt in range(max_attempts):
            try:
                return scorer.score(req)
            except ScorerTransportError as exc:
                if attempt == max_attempts - 1:
                    return exc
                delay = retry_base_delay * (2**attempt)
                log.warning(
                    "transient scorer failure for (%s, %s), retrying in %.2fs: %s",
                    req.item_id, req.learner_id, delay, exc,
                )
                time.sleep(delay)
            except ScorerProtocolError as exc:
                return exc

    if max_in_flight == 1:
        results = [one(req) for req in requests_list]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(one, requests_list))
    failures = [
        (req.item_id, req.learner_id, str(res))
        for req, res in zip(requests_list, results)
        if isinstance(res, Exception)
    ]
    if failures:
        raise BatchScoreError(
            f"{len(failures)} cell(s) failed scoring: {failures[:5]}", failures
        )
    return results


def parse_scorer_spec(spec: str, truth: Optional[ScoreMatrix] = None, seed: int = 0):
    """Build a scorer from a CLI-style spec string.

    Forms: synthetic:<sigma>, synthetic:qwk=<target>, exec:<command>,
    http:<url>. Synthetic forms need a truth matrix.
    """
    kind, _, arg = spec.partition(":")
    if kind == "synthetic":
        if truth is None:
            raise ShapeError("synthetic scorer needs a --truth matrix")
        if arg.startswith("qwk="):
            target = float(arg[4:])
            counts = np.bincount(
                truth.values[truth.observed], minlength=truth.n_categories + 1
            )[1:]
            sigma = calibrate_sigma(target, truth.n_categories, counts, seed=seed)
        else:
            sigma = float(arg)
        return SyntheticScorer(truth, SyntheticScorerConfig(noise_sigma=sigma, seed=seed))
    if kind == "exec":
        return ExecScorer(arg)
    if kind == "http":
        return HttpScorer(arg)
    raise ShapeError(f"unknown scorer spec {spec!r}")
