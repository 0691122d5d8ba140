"""File formats: score-matrix CSV, mask CSV, abilities/params JSON, corpora.

Score matrix CSV: optional leading comment `# K=<n>`, then a header row
`learner_id,item_1,...,item_I` and one row per learner; missing cells
are written as -1 (interchange only; in memory missingness is a mask).
"""

from __future__ import annotations

import csv
import json
import os
from typing import Optional, Sequence

import numpy as np

from .errors import DataFormatError
from .model import AbilitySet, AnswerCorpus, GpcmItemParams, ScoreMatrix


def write_score_matrix(path: str, scores: ScoreMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# K={scores.n_categories}\n")
        writer = csv.writer(fh)
        writer.writerow(["learner_id"] + [f"item_{i+1}" for i in range(scores.n_items)])
        for j in range(scores.n_learners):
            row = [str(j + 1)]
            for i in range(scores.n_items):
                row.append(str(int(scores.values[i, j])) if scores.observed[i, j] else "-1")
            writer.writerow(row)


def read_score_matrix(path: str, n_categories: Optional[int] = None) -> ScoreMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        k_from_file = None
        if first.startswith("#"):
            frag = first.strip().lstrip("#").strip()
            if frag.upper().startswith("K="):
                try:
                    k_from_file = int(frag[2:])
                except ValueError:
                    raise DataFormatError(f"{path}: bad K declaration {first.strip()!r}")
            header_line = fh.readline()
        else:
            header_line = first
        header = next(csv.reader([header_line]), None)
        if not header or header[0] != "learner_id":
            raise DataFormatError(f"{path}: expected header starting with learner_id")
        n_items = len(header) - 1
        values_rows = []
        observed_rows = []
        for lineno, row in enumerate(csv.reader(fh), start=3):
            if not row:
                continue
            if len(row) != n_items + 1:
                raise DataFormatError(f"{path} line {lineno}: expected {n_items + 1} fields")
            vals, obs = [], []
            for col, cell in enumerate(row[1:], start=1):
                try:
                    v = int(cell)
                except ValueError:
                    raise DataFormatError(
                        f"{path} line {lineno}, column {col}: non-integer score {cell!r}"
                    )
                obs.append(v != -1)
                vals.append(v if v != -1 else 1)
            values_rows.append(vals)
            observed_rows.append(obs)
    if not values_rows:
        raise DataFormatError(f"{path}: no learner rows")
    values = np.array(values_rows, dtype=np.int64).T  # learners-as-rows -> (I, J)
    observed = np.array(observed_rows, dtype=bool).T
    K = n_categories if n_categories is not None else k_from_file
    if K is None:
        K = int(values[observed].max()) if observed.any() else 2
    seen = values[observed]
    if seen.size and (seen.min() < 1 or seen.max() > K):
        bad = np.nonzero(observed & ((values < 1) | (values > K)))
        i, j = int(bad[0][0]), int(bad[1][0])
        raise DataFormatError(
            f"{path}: score {values[i, j]} outside [1, {K}] at item {i + 1}, learner row {j + 1}"
        )
    return ScoreMatrix(values, observed, K)


def write_mask(path: str, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=bool)
    n_items, n_learners = mask.shape
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["learner_id"] + [f"item_{i+1}" for i in range(n_items)])
        for j in range(n_learners):
            writer.writerow([str(j + 1)] + [str(int(mask[i, j])) for i in range(n_items)])


def read_mask(path: str) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "learner_id":
            raise DataFormatError(f"{path}: expected mask header starting with learner_id")
        rows = [[c == "1" for c in row[1:]] for row in reader if row]
    if not rows:
        raise DataFormatError(f"{path}: no mask rows")
    return np.array(rows, dtype=bool).T


def write_abilities(path: str, abilities: AbilitySet) -> None:
    payload = {
        "abilities": list(abilities.abilities),
        "normalized": abilities.normalized,
        "mean": abilities.mean,
        "variance": abilities.variance,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def read_abilities(path: str) -> AbilitySet:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return AbilitySet(
            np.array(payload["abilities"], dtype=float),
            bool(payload["normalized"]),
            float(payload["mean"]),
            float(payload["variance"]),
        )
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing field {exc}")


def write_item_params(path: str, items: Sequence[GpcmItemParams]) -> None:
    payload = [
        {"alpha": it.discrimination, "beta": it.difficulty, "d": list(it.step_difficulties)}
        for it in items
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def read_item_params(path: str):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return [
            GpcmItemParams(it["alpha"], it["beta"], np.array(it["d"], dtype=float))
            for it in payload
        ]
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: malformed item parameters ({exc})")


def write_corpus(dir_path: str, corpus: AnswerCorpus) -> None:
    """One JSON file per item: {item_id, prompt, rubric, reference_answer, answers}."""
    os.makedirs(dir_path, exist_ok=True)
    for i, row in enumerate(corpus.texts):
        payload = {
            "item_id": f"item_{i+1}",
            "prompt": corpus.item_prompts[i],
            "rubric": corpus.item_rubrics[i],
            "reference_answer": corpus.reference_answers[i],
            "answers": {str(j + 1): text for j, text in enumerate(row) if text is not None},
        }
        with open(os.path.join(dir_path, f"item_{i+1}.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, ensure_ascii=False)


def read_corpus(dir_path: str, n_items: int, n_learners: int) -> AnswerCorpus:
    texts, prompts, rubrics, refs = [], [], [], []
    for i in range(n_items):
        path = os.path.join(dir_path, f"item_{i+1}.json")
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"{path}: {exc}")
        prompts.append(payload.get("prompt"))
        rubrics.append(payload.get("rubric"))
        refs.append(payload.get("reference_answer"))
        answers = payload.get("answers", {})
        texts.append(tuple(answers.get(str(j + 1)) for j in range(n_learners)))
    return AnswerCorpus(tuple(texts), tuple(prompts), tuple(rubrics), tuple(refs))
