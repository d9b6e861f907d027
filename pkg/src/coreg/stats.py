"""Statistical program over the joined gaze/EEG feature table: labeling
from agreement ratings, paired comparisons (Welch t, permutation p,
Cohen's d, BIC-approximate Bayes factor), cross-modal correlations, and a
congruence classifier."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd
from scipy import stats as sps

from .errors import (
    InsufficientData,
    NonConvergence,
    SingleClass,
    UnknownSentenceId,
)

CONGRUENT = "congruent"
INCONGRUENT = "incongruent"
EXCLUDED = "excluded"

# Agreement label rule on the 1-5 scale; midpoint 3 is dropped.
CONGRUENT_MIN_RATING = 4
INCONGRUENT_MAX_RATING = 2

FEATURE_COLUMNS = (
    "total_fixation_ms",
    "fixation_count",
    "theta_parietal_uv2",
    "n400_uv",
    "expectedness",
)


@dataclass
class ComparisonResult:
    feature_name: str
    n_congruent: int
    n_incongruent: int
    mean_congruent: float
    mean_incongruent: float
    t_statistic: float
    p_permutation: float
    cohens_d: float
    bayes_factor_10: float

    def to_dict(self) -> dict:
        return asdict(self)


def label_from_rating(agreement: int) -> str:
    if agreement >= CONGRUENT_MIN_RATING:
        return CONGRUENT
    if agreement <= INCONGRUENT_MAX_RATING:
        return INCONGRUENT
    return EXCLUDED


def build_feature_table(
    sentence_rows: dict[int, dict],
    ratings: list[tuple[int, int]],
) -> pd.DataFrame:
    """Join per-sentence feature dicts with agreement ratings into the
    labeled feature table (one row per rated sentence).

    ``sentence_rows`` maps sentence_id to a dict of feature values; a
    rating for an unknown sentence raises UnknownSentenceId.
    """
    records = []
    for sentence_id, agreement in ratings:
        if sentence_id not in sentence_rows:
            raise UnknownSentenceId(f"rating references unknown sentence {sentence_id}")
        row = {"unit_id": sentence_id, "congruence": label_from_rating(agreement)}
        for name in FEATURE_COLUMNS:
            row[name] = sentence_rows[sentence_id].get(name, np.nan)
        records.append(row)
    table = pd.DataFrame.from_records(
        records, columns=["unit_id", "congruence", *FEATURE_COLUMNS]
    )
    if table["unit_id"].duplicated().any():
        raise UnknownSentenceId("duplicate sentence ids in ratings")
    return table


def aggregate_sentence_features(
    word_sentence: dict[int, int],
    word_fixation_ms: dict[int, float],
    word_fixation_count: dict[int, int],
    word_theta: dict[int, float],
    word_n400: dict[int, float],
    word_expectedness: dict[int, float | None],
) -> dict[int, dict]:
    """Sentence-level rows: fixation time/count summed, EEG features and
    expectedness averaged over the sentence's fixated words."""
    rows: dict[int, dict] = {}
    for word_id, sid in word_sentence.items():
        if word_id not in word_fixation_ms:
            continue
        row = rows.setdefault(
            sid,
            {"total_fixation_ms": 0.0, "fixation_count": 0, "_theta": [], "_n400": [], "_exp": []},
        )
        row["total_fixation_ms"] += word_fixation_ms[word_id]
        row["fixation_count"] += word_fixation_count.get(word_id, 0)
        if word_id in word_theta:
            row["_theta"].append(word_theta[word_id])
        if word_id in word_n400:
            row["_n400"].append(word_n400[word_id])
        exp = word_expectedness.get(word_id)
        if exp is not None:
            row["_exp"].append(exp)
    for row in rows.values():
        row["theta_parietal_uv2"] = float(np.mean(row.pop("_theta"))) if row["_theta"] else np.nan
        row["n400_uv"] = float(np.mean(row.pop("_n400"))) if row["_n400"] else np.nan
        row["expectedness"] = float(np.mean(row.pop("_exp"))) if row["_exp"] else np.nan
    return rows


def _two_groups(table: pd.DataFrame, feature_name: str):
    sub = table[table["congruence"].isin([CONGRUENT, INCONGRUENT])]
    sub = sub.dropna(subset=[feature_name])
    a = sub.loc[sub["congruence"] == CONGRUENT, feature_name].to_numpy(dtype=float)
    b = sub.loc[sub["congruence"] == INCONGRUENT, feature_name].to_numpy(dtype=float)
    return a, b


def welch_t(a: np.ndarray, b: np.ndarray) -> float:
    va, vb = a.var(ddof=1), b.var(ddof=1)
    denom = np.sqrt(va / len(a) + vb / len(b))
    if denom == 0:
        return 0.0
    return float((a.mean() - b.mean()) / denom)


def cohens_d(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = len(a), len(b)
    pooled = np.sqrt(((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2))
    if pooled == 0:
        return 0.0
    return float((a.mean() - b.mean()) / pooled)


def bic_bayes_factor(a: np.ndarray, b: np.ndarray) -> float:
    """BF10 = exp((BIC_null - BIC_alt) / 2) for the one-predictor linear
    model y ~ group versus the intercept-only null."""
    y = np.concatenate([a, b])
    n = len(y)
    rss_null = np.sum((y - y.mean()) ** 2)
    rss_alt = np.sum((a - a.mean()) ** 2) + np.sum((b - b.mean()) ** 2)
    rss_null = max(rss_null, 1e-300)
    rss_alt = max(rss_alt, 1e-300)
    bic_null = n * np.log(rss_null / n) + 1 * np.log(n)
    bic_alt = n * np.log(rss_alt / n) + 2 * np.log(n)
    return float(np.exp((bic_null - bic_alt) / 2.0))


def paired_comparison(
    table: pd.DataFrame,
    feature_name: str,
    n_permutations: int = 10_000,
    seed: int = 0,
) -> ComparisonResult:
    """Congruent-vs-incongruent comparison of one feature."""
    if n_permutations < 100:
        raise ValueError("n_permutations must be >= 100")
    a, b = _two_groups(table, feature_name)
    if len(a) < 2 or len(b) < 2:
        raise InsufficientData(
            f"{feature_name}: need >= 2 rows per condition, got {len(a)}/{len(b)}"
        )
    t_obs = welch_t(a, b)
    pooled = np.concatenate([a, b])
    na = len(a)
    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(pooled, (n_permutations, 1)), axis=1)
    pa, pb = perms[:, :na], perms[:, na:]
    denom = np.sqrt(pa.var(axis=1, ddof=1) / na + pb.var(axis=1, ddof=1) / (len(pooled) - na))
    denom[denom == 0] = np.inf
    t_perm = (pa.mean(axis=1) - pb.mean(axis=1)) / denom
    count = int(np.sum(np.abs(t_perm) >= abs(t_obs) - 1e-12))
    p_perm = (count + 1) / (n_permutations + 1)
    return ComparisonResult(
        feature_name=feature_name,
        n_congruent=len(a),
        n_incongruent=len(b),
        mean_congruent=float(a.mean()),
        mean_incongruent=float(b.mean()),
        t_statistic=t_obs,
        p_permutation=float(p_perm),
        cohens_d=cohens_d(a, b),
        bayes_factor_10=bic_bayes_factor(a, b),
    )


def correlate_modalities(
    table: pd.DataFrame,
    eeg_features: list[str],
    gaze_features: list[str],
) -> pd.DataFrame:
    """Pearson r and Spearman rho for every (eeg, gaze) feature pair on
    pairwise-complete rows."""
    records = []
    for ef in eeg_features:
        for gf in gaze_features:
            sub = table[[ef, gf]].dropna()
            if len(sub) < 3:
                raise InsufficientData(f"{ef} vs {gf}: need >= 3 complete rows")
            x, y = sub[ef].to_numpy(dtype=float), sub[gf].to_numpy(dtype=float)
            r = sps.pearsonr(x, y).statistic if x.std() > 0 and y.std() > 0 else np.nan
            rho = sps.spearmanr(x, y).statistic if x.std() > 0 and y.std() > 0 else np.nan
            records.append(
                {"eeg_feature": ef, "gaze_feature": gf, "pearson_r": float(r), "spearman_rho": float(rho)}
            )
    return pd.DataFrame.from_records(records)


# --------------------------------------------------------------------------
# congruence classifier
# --------------------------------------------------------------------------

def _fit_logistic(X, y, l2, max_iter=10_000, tol=1e-4, lr=0.5):
    """L2-penalized logistic regression by full-batch gradient ascent on the
    log-likelihood; intercept unpenalized."""
    n, d = X.shape
    Xb = np.hstack([np.ones((n, 1)), X])
    w = np.zeros(d + 1)
    penalty = np.concatenate([[0.0], np.full(d, l2)])
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-Xb @ w))
        grad = Xb.T @ (y - p) / n - penalty * w
        w += lr * grad
        if np.linalg.norm(grad) < tol:
            return w
    raise NonConvergence("logistic fit did not converge within max_iter")


def _auc(scores, labels) -> float:
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    ranks[order] = np.arange(1, len(scores) + 1)
    # midranks for ties
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1
        i = j + 1
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return np.nan
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def train_eval_classifier(
    table: pd.DataFrame,
    feature_set: list[str],
    k_folds: int = 5,
    seed: int = 0,
    l2: float = 1e-3,
):
    """Stratified k-fold CV of the logistic congruence classifier.

    Returns (coefficients fit on all data in original feature units,
    mean CV accuracy, mean CV AUC).  Deterministic under a fixed seed.
    """
    if k_folds < 2:
        raise ValueError("k_folds must be >= 2")
    sub = table[table["congruence"].isin([CONGRUENT, INCONGRUENT])].dropna(subset=feature_set)
    X = sub[feature_set].to_numpy(dtype=float)
    y = (sub["congruence"] == INCONGRUENT).to_numpy(dtype=float)
    if len(np.unique(y)) < 2:
        raise SingleClass("both congruence classes required")

    rng = np.random.default_rng(seed)
    folds = _stratified_folds(y, k_folds, rng)
    accs, aucs = [], []
    for test_idx in folds:
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        if len(np.unique(y[train_mask])) < 2 or len(test_idx) == 0:
            continue
        mu = X[train_mask].mean(axis=0)
        sd = X[train_mask].std(axis=0)
        sd[sd == 0] = 1.0
        w = _fit_logistic((X[train_mask] - mu) / sd, y[train_mask], l2)
        scores = np.hstack([np.ones((len(test_idx), 1)), (X[test_idx] - mu) / sd]) @ w
        pred = (scores > 0).astype(float)
        accs.append(float((pred == y[test_idx]).mean()))
        auc = _auc(scores, y[test_idx])
        if not np.isnan(auc):
            aucs.append(auc)

    mu, sd = X.mean(axis=0), X.std(axis=0)
    sd[sd == 0] = 1.0
    w_std = _fit_logistic((X - mu) / sd, y, l2)
    # map standardized-space weights back to original feature units
    coef = w_std[1:] / sd
    intercept = w_std[0] - np.sum(w_std[1:] * mu / sd)
    coefficients = {"intercept": float(intercept)}
    coefficients.update({f: float(c) for f, c in zip(feature_set, coef)})
    return coefficients, float(np.mean(accs)), float(np.mean(aucs)) if aucs else np.nan


def _stratified_folds(y, k, rng):
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for i, j in enumerate(idx):
            folds[i % k].append(int(j))
    return [np.array(sorted(f), dtype=int) for f in folds]
