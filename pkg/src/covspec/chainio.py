"""Chain file format: JSON lines with a header, one record per iteration, and
a checksummed footer.

The header carries the format tag, sampler configuration, and a summary of
the input data (enough to rebuild partitions and evaluate spectra without the
raw series). The footer stores the record count and a SHA-256 over every
preceding line, so truncated or edited files are detected on read. Files are
written to a temporary sibling and atomically renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeriesSet
from .sampler import ChainRecord, SamplerConfig
from .whittle import BlockParams, Tau2Prior

FORMAT_TAG = "covspec-chain"
FORMAT_VERSION = 1


class ChainIOError(RuntimeError):
    """Unreadable, truncated, or corrupted chain file."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_to_dict(config: SamplerConfig) -> dict:
    return {
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "t_min": config.t_min,
        "w_min": config.w_min,
        "max_time_segments": config.max_time_segments,
        "max_cov_segments": config.max_cov_segments,
        "n_basis": config.n_basis,
        "sigma2_alpha": config.sigma2_alpha,
        "pi_mix_time": config.pi_mix_time,
        "pi_mix_cov": config.pi_mix_cov,
        "pair_relocation_prob": config.pair_relocation_prob,
        "seed": config.seed,
        "tau2_prior": {
            "kind": config.tau2_prior.kind,
            "a0": config.tau2_prior.a0,
            "b0": config.tau2_prior.b0,
            "tau2_max": config.tau2_prior.tau2_max,
        },
        "include_relocation_density": config.include_relocation_density,
        "prior_only": config.prior_only,
        "audit_every": config.audit_every,
        "laplace_grad_tol": config.laplace_grad_tol,
        "laplace_max_iter": config.laplace_max_iter,
    }


def config_from_dict(d: dict) -> SamplerConfig:
    d = dict(d)
    tp = d.pop("tau2_prior")
    return SamplerConfig(
        tau2_prior=Tau2Prior(
            kind=tp["kind"], a0=tp["a0"], b0=tp["b0"], tau2_max=tp["tau2_max"]
        ),
        **d,
    )


def config_hash(config: SamplerConfig) -> str:
    return hashlib.sha256(_dumps(config_to_dict(config)).encode()).hexdigest()


def config_family_hash(config: SamplerConfig) -> str:
    """Hash of the configuration with the seed removed: chains that differ only
    by seed belong to the same family and may be pooled."""
    d = config_to_dict(config)
    del d["seed"]
    return hashlib.sha256(_dumps(d).encode()).hexdigest()


def _record_to_dict(rec: ChainRecord) -> dict:
    return {
        "it": rec.iteration,
        "tc": list(rec.time_cuts),
        "cc": [float(c) for c in rec.cov_cuts],
        "blocks": [
            [[bp.alpha, [float(b) for b in bp.beta], bp.tau2] for bp in row]
            for row in rec.params
        ],
        "ll": [list(row) for row in rec.loglik],
    }


def _record_from_dict(d: dict, n_times: int) -> ChainRecord:
    params = tuple(
        tuple(
            BlockParams(alpha=float(a), beta=np.asarray(b, dtype=float), tau2=float(t))
            for a, b, t in row
        )
        for row in d["blocks"]
    )
    return ChainRecord(
        iteration=int(d["it"]),
        n_times=n_times,
        time_cuts=tuple(int(c) for c in d["tc"]),
        cov_cuts=tuple(float(c) for c in d["cc"]),
        params=params,
        loglik=tuple(tuple(float(v) for v in row) for row in d["ll"]),
    )


def data_summary(data: TimeSeriesSet) -> dict:
    return {
        "n_subjects": data.n_subjects,
        "n_times": data.n_times,
        "covariates": [float(w) for w in data.covariates],
        "raw_covariates": [float(w) for w in data.raw_covariates],
        "subject_ids": list(data.subject_ids),
    }


@dataclass(frozen=True)
class LoadedChain:
    header: dict
    config: SamplerConfig
    records: list
    data: dict

    @property
    def seed(self) -> int:
        return self.config.seed


def write_chain(path: str, records: list, config: SamplerConfig, data: TimeSeriesSet) -> None:
    header = {
        "kind": "header",
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "seed": config.seed,
        "config_hash": config_hash(config),
        "config": config_to_dict(config),
        "data": data_summary(data),
    }
    digest = hashlib.sha256()
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            for obj in [header, *map(_record_to_dict, records)]:
                line = _dumps(obj) + "\n"
                digest.update(line.encode())
                fh.write(line)
            footer = {"kind": "footer", "count": len(records), "sha256": digest.hexdigest()}
            fh.write(_dumps(footer) + "\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def read_chain(path: str) -> LoadedChain:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ChainIOError(f"cannot read chain file {path}: {exc}") from exc
    if not lines:
        raise ChainIOError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ChainIOError(f"{path}: malformed header: {exc}") from exc
    if header.get("kind") != "header" or header.get("format") != FORMAT_TAG:
        raise ChainIOError(f"{path}: not a {FORMAT_TAG} file")
    if header.get("version") != FORMAT_VERSION:
        raise ChainIOError(f"{path}: unsupported version {header.get('version')}")
    try:
        footer = json.loads(lines[-1])
    except json.JSONDecodeError as exc:
        raise ChainIOError(f"{path}: malformed footer: {exc}") from exc
    if footer.get("kind") != "footer":
        raise ChainIOError(f"{path}: missing footer (truncated file?)")
    digest = hashlib.sha256()
    for line in lines[:-1]:
        digest.update(line.encode())
    if digest.hexdigest() != footer.get("sha256"):
        raise ChainIOError(f"{path}: checksum mismatch (corrupted file?)")
    body = lines[1:-1]
    if len(body) != footer.get("count"):
        raise ChainIOError(
            f"{path}: record count {len(body)} does not match footer {footer.get('count')}"
        )
    config = config_from_dict(header["config"])
    n_times = header["data"]["n_times"]
    records = []
    for i, line in enumerate(body):
        try:
            records.append(_record_from_dict(json.loads(line), n_times))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ChainIOError(f"{path}: bad record at line {i + 2}: {exc}") from exc
    return LoadedChain(header=header, config=config, records=records, data=header["data"])
