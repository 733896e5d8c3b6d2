"""
运行目录的文件读写: 时间序列 CSV, 快照, 报告, 运行元数据, 扫描汇总

每个运行一个目录, 并发的扫描运行之间不共享文件。
浮点数一律以 repr() 写出, 读回逐位相同。
"""
import csv
import json
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import ContractViolation
from app.models.fields import FieldState, RadialGrid
from app.models.report import RunMeta, RunReport, SweepRow
from app.models.samples import (
    FunctionalSample,
    csv_header,
    radii_from_header,
    sample_from_record,
    sample_to_row,
)

logger = logging.getLogger(__name__)

SNAPSHOT_DIR = "snapshots"
META_NAME = "run_meta.json"
SNAPSHOT_COLUMNS = ("r", "u", "v", "w")


class SeriesWriter:
    """逐行写出并立即 flush, 异常终止时已写部分仍是合法 CSV"""

    def __init__(self, path: Path, radii: Sequence[float]):
        self.path = path
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(csv_header(radii))
        self._fh.flush()
        self.rows = 0

    def write(self, sample: FunctionalSample) -> None:
        self._writer.writerow(sample_to_row(sample))
        self._fh.flush()
        self.rows += 1

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


class RunRepository:
    """单个运行目录"""

    def __init__(self, directory: Union[str, Path], csv_name: str = "series.csv",
                 report_name: str = "report.json"):
        self.directory = Path(directory)
        self.csv_path = self.directory / csv_name
        self.report_path = self.directory / report_name
        self.meta_path = self.directory / META_NAME
        self.snapshot_dir = self.directory / SNAPSHOT_DIR

    def prepare(self) -> None:
        self.snapshot_dir.mkdir(parents=True, exist_ok=True)

    def open_series(self, radii: Sequence[float]) -> SeriesWriter:
        return SeriesWriter(self.csv_path, radii)

    def read_series(self) -> Tuple[List[float], List[FunctionalSample]]:
        return read_series_csv(self.csv_path)

    def write_checkpoint(self, index: int, state: FieldState, grid: RadialGrid, config_hash: str) -> str:
        name = f"snapshot_{index}.csv"
        write_checkpoint(self.snapshot_dir / name, state, grid.R, grid.N, config_hash, centers=grid.cell_centers)
        logger.info(f"Wrote snapshot {name} at t={state.t:.6g}")
        return name

    def read_checkpoint(self, name: str) -> Tuple[dict, FieldState]:
        return read_checkpoint(self.snapshot_dir / name)

    def write_report(self, report: RunReport) -> None:
        self.report_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")

    def read_report(self) -> RunReport:
        return RunReport.model_validate_json(self.report_path.read_text(encoding="utf-8"))

    def write_meta(self, meta: RunMeta) -> None:
        self.meta_path.write_text(meta.model_dump_json(indent=2) + "\n", encoding="utf-8")

    def read_meta(self) -> RunMeta:
        if not self.meta_path.is_file():
            raise ContractViolation(f"{self.directory} holds no {META_NAME}")
        return RunMeta.model_validate_json(self.meta_path.read_text(encoding="utf-8"))


def read_series_csv(path: Union[str, Path]) -> Tuple[List[float], List[FunctionalSample]]:
    """读回时间序列; 返回 (截断半径, 采样)"""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        radii = radii_from_header(reader.fieldnames or [])
        samples = [sample_from_record(record, radii) for record in reader]
    return radii, samples


def write_checkpoint(path: Path, state: FieldState, R: float, N: int, config_hash: str,
                     centers=None) -> None:
    """
    快照: 首行为 "# " + JSON 头 {R, N, t, step_count, config_hash}, 然后是 r,u,v,w 列
    """
    if centers is None:
        dr = R / N
        centers = (np.arange(N, dtype=np.float64) + 0.5) * dr
    header = {"R": R, "N": N, "t": state.t, "step_count": state.step_count, "config_hash": config_hash}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SNAPSHOT_COLUMNS)
        for r, u, v, w in zip(centers, state.u, state.v, state.w):
            writer.writerow((repr(float(r)), repr(float(u)), repr(float(v)), repr(float(w))))


def read_checkpoint(path: Union[str, Path]) -> Tuple[dict, FieldState]:
    """读回快照, 场值逐位还原"""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ContractViolation(f"{path} is missing its checkpoint header")
        header = json.loads(first[1:])
        reader = csv.DictReader(fh)
        rows = list(reader)
    if len(rows) != header["N"]:
        raise ContractViolation(f"{path} holds {len(rows)} cells, header says {header['N']}")
    fields = {name: np.array([float(row[name]) for row in rows], dtype=np.float64) for name in ("u", "v", "w")}
    state = FieldState(t=float(header["t"]), step_count=int(header["step_count"]), **fields)
    return header, state


def write_sweep_summary(path: Union[str, Path], rows: Sequence[SweepRow]) -> None:
    """一行一个质量倍数, 按质量排序"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(SweepRow.model_fields)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in sorted(rows, key=lambda r: r.mass):
            record = row.model_dump()
            writer.writerow({k: ("" if v is None else v) for k, v in record.items()})
