"""Review and monitoring HTTP API over persisted runs plus the live queue.

Read endpoints serve whatever sits in the runs directory; the candidate
endpoints also see the in-memory review queue so a blocked evolution
run can be unblocked from another process via plain HTTP.  Responses
are JSON with permissive CORS so a browser console served from another
origin can call them directly.

    GET  /api/runs
    GET  /api/runs/{run_id}
    GET  /api/runs/{run_id}/metrics
    GET  /api/candidates[?status=...]
    GET  /api/candidates/{id}
    GET  /api/candidates/{id}/heatmap[?resolution=N]
    POST /api/candidates/{id}/decision   {"verdict": "approve"|"reject", "note": "..."}

Candidate ids are scoped to their run; lookups check the live queue
first, then run directories newest first.  Decisions only apply to
queued (live) candidates: 200 on success, 400 on a malformed body, 404
for an unknown id, and 409 when a verdict already exists.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .dsl import ParseError, parse
from .ecf import AlreadyDecidedError, CandidateRecord, ReviewQueue
from .env import EnvConfig
from .metrics import heatmap
from .rundir import RunDir, list_runs

DEFAULT_RESOLUTION = 50
MAX_BODY_BYTES = 64 * 1024


def _run_summary(run: RunDir) -> dict:
    info = run.read_run_info()
    best = info.get("best") or {}
    return {
        "run_id": run.run_id,
        "status": info.get("status", "unknown"),
        "iterations": len(info.get("iterations", [])),
        "best_fitness": best.get("fitness"),
        "best_candidate": best.get("candidate_id"),
    }


def _float_or_none(text: str):
    try:
        return float(text)
    except (TypeError, ValueError):
        return None


class ReviewService:
    """Routing and state; the HTTP handler delegates everything here."""

    def __init__(
        self,
        runs_root: str | Path,
        env_config: EnvConfig | None = None,
        queue: ReviewQueue | None = None,
        audit_path: str | Path | None = None,
    ):
        self.runs_root = Path(runs_root)
        self.env_config = env_config if env_config is not None else EnvConfig()
        self.queue = queue if queue is not None else ReviewQueue()
        self.audit_path = (
            Path(audit_path)
            if audit_path is not None
            else self.runs_root / "service-audit.log"
        )
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    # lookups -------------------------------------------------------------

    def runs(self) -> list[dict]:
        return [_run_summary(r) for r in list_runs(self.runs_root)]

    def run_detail(self, run_id: str) -> dict | None:
        for run in list_runs(self.runs_root):
            if run.run_id == run_id:
                return run.read_run_info()
        return None

    def run_metrics(self, run_id: str) -> dict | None:
        target = None
        for run in list_runs(self.runs_root):
            if run.run_id == run_id:
                target = run
                break
        if target is None:
            return None
        evaluations = []
        for row in target.read_metrics():
            evaluations.append(
                {
                    "iteration": int(row["iteration"]),
                    "candidate_id": row["candidate_id"],
                    "origin": row["origin"],
                    "phase": row["phase"],
                    "epochs": int(row["epochs"]),
                    "avg_return": _float_or_none(row["avg_return"]),
                    "avg_cost": _float_or_none(row["avg_cost"]),
                    "tcr": _float_or_none(row["tcr"]),
                    "her": _float_or_none(row["her"]),
                    "fitness": _float_or_none(row["fitness"]),
                    "wall_clock_s": _float_or_none(row["wall_clock_s"]),
                }
            )
        curves = {}
        for path in sorted(target.candidates_dir.glob("*.curve.csv")):
            cid = path.name[: -len(".curve.csv")]
            report = target.load_curve(cid)
            curves[cid] = [
                {
                    "epoch": r.epoch,
                    "avg_return": r.avg_return,
                    "avg_cost": r.avg_cost,
                    "avg_shaped_return": r.avg_shaped_return,
                    "episodes": r.episodes,
                    "tcr": r.tcr,
                    "her": r.her,
                }
                for r in report.rows
            ]
        return {"run_id": run_id, "evaluations": evaluations, "curves": curves}

    def candidates(self, status: str | None = None) -> list[dict]:
        out = []
        seen = set()
        for rec in self.queue.pending():
            entry = rec.as_dict()
            entry["live"] = True
            entry["run_id"] = None
            out.append(entry)
            seen.add(rec.id)
        for run in reversed(list_runs(self.runs_root)):
            for data in run.list_candidates():
                if data["id"] in seen:
                    continue
                data["live"] = False
                data["run_id"] = run.run_id
                out.append(data)
        if status is not None:
            out = [c for c in out if c["status"] == status]
        return out

    def candidate_detail(self, candidate_id: str) -> dict | None:
        try:
            rec = self.queue.record(candidate_id)
        except KeyError:
            rec = None
        if rec is not None:
            entry = rec.as_dict()
            entry["live"] = True
            entry["run_id"] = None
            decision = self.queue.decision(candidate_id)
            if decision is not None:
                entry["decision"] = decision.as_dict()
            return entry
        for run in reversed(list_runs(self.runs_root)):
            path = run.candidates_dir / f"{candidate_id}.json"
            if path.is_file():
                data = json.loads(path.read_text())
                data["live"] = False
                data["run_id"] = run.run_id
                return data
        return None

    def candidate_heatmap(
        self, candidate_id: str, resolution: int = DEFAULT_RESOLUTION
    ) -> dict | None:
        detail = self.candidate_detail(candidate_id)
        if detail is None:
            return None
        try:
            expr = parse(detail["source_text"])
        except ParseError:
            return {"error": "candidate has no valid expression"}
        grid = heatmap(expr, self.env_config, resolution=resolution)
        return {
            "candidate_id": candidate_id,
            "x_min": grid.x_min,
            "x_max": grid.x_max,
            "y_min": grid.y_min,
            "y_max": grid.y_max,
            "resolution": grid.resolution,
            "values": grid.values.tolist(),
            "hazards": [
                {"x": cx, "y": cy, "radius": r}
                for (cx, cy), r in self.env_config.hazards
            ],
            "goal": {
                "x": self.env_config.goal_center[0],
                "y": self.env_config.goal_center[1],
                "radius": self.env_config.goal_radius,
            },
        }

    def decide(self, candidate_id: str, verdict: str, note: str) -> dict:
        decision = self.queue.decide(candidate_id, verdict, note, source="remote")
        self._audit_mutation(candidate_id, decision.as_dict())
        return decision.as_dict()

    def _audit_mutation(self, candidate_id: str, decision: dict) -> None:
        entry = {
            "ts": time.time(),
            "event": "api-decision",
            "candidate": candidate_id,
            "decision": decision,
        }
        self.audit_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.audit_path, "a") as fh:
            fh.write(json.dumps(entry) + "\n")

    # server lifecycle -----------------------------------------------------

    def start(self, host: str = "127.0.0.1", port: int = 0) -> tuple[str, int]:
        handler = _make_handler(self)
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )
        self._thread.start()
        return self._server.server_address[:2]

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def serve_forever(self, host: str, port: int) -> None:
        handler = _make_handler(self)
        self._server = ThreadingHTTPServer((host, port), handler)
        try:
            self._server.serve_forever()
        finally:
            self._server.server_close()


def _make_handler(service: ReviewService):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, status: int, payload: dict | list) -> None:
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self._cors()
            self.end_headers()
            self.wfile.write(body)

        def _cors(self) -> None:
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header(
                "Access-Control-Allow-Methods", "GET, POST, OPTIONS"
            )
            self.send_header("Access-Control-Allow-Headers", "Content-Type")

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.end_headers()

        def do_GET(self):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            query = parse_qs(url.query)
            if parts == ["api", "runs"]:
                self._send(200, service.runs())
                return
            if len(parts) == 3 and parts[:2] == ["api", "runs"]:
                detail = service.run_detail(parts[2])
                if detail is None:
                    self._send(404, {"error": f"no run {parts[2]!r}"})
                else:
                    self._send(200, detail)
                return
            if (
                len(parts) == 4
                and parts[:2] == ["api", "runs"]
                and parts[3] == "metrics"
            ):
                metrics = service.run_metrics(parts[2])
                if metrics is None:
                    self._send(404, {"error": f"no run {parts[2]!r}"})
                else:
                    self._send(200, metrics)
                return
            if parts == ["api", "candidates"]:
                status = query.get("status", [None])[0]
                self._send(200, service.candidates(status))
                return
            if len(parts) == 3 and parts[:2] == ["api", "candidates"]:
                detail = service.candidate_detail(parts[2])
                if detail is None:
                    self._send(404, {"error": f"no candidate {parts[2]!r}"})
                else:
                    self._send(200, detail)
                return
            if (
                len(parts) == 4
                and parts[:2] == ["api", "candidates"]
                and parts[3] == "heatmap"
            ):
                try:
                    resolution = int(
                        query.get("resolution", [str(DEFAULT_RESOLUTION)])[0]
                    )
                except ValueError:
                    self._send(400, {"error": "resolution must be an integer"})
                    return
                if not 2 <= resolution <= 400:
                    self._send(400, {"error": "resolution out of range (2..400)"})
                    return
                grid = service.candidate_heatmap(parts[2], resolution)
                if grid is None:
                    self._send(404, {"error": f"no candidate {parts[2]!r}"})
                elif "error" in grid:
                    self._send(400, grid)
                else:
                    self._send(200, grid)
                return
            self._send(404, {"error": "not found"})

        def do_POST(self):
            parts = [p for p in urlparse(self.path).path.split("/") if p]
            if (
                len(parts) == 4
                and parts[:2] == ["api", "candidates"]
                and parts[3] == "decision"
            ):
                self._handle_decision(parts[2])
                return
            self._send(404, {"error": "not found"})

        def _handle_decision(self, candidate_id: str) -> None:
            length = int(self.headers.get("Content-Length", 0))
            if length > MAX_BODY_BYTES:
                self._send(400, {"error": "body too large"})
                return
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw)
            except json.JSONDecodeError:
                self._send(400, {"error": "body must be JSON"})
                return
            if not isinstance(body, dict) or "verdict" not in body:
                self._send(400, {"error": "body needs a 'verdict' field"})
                return
            verdict = body["verdict"]
            note = body.get("note", "")
            if not isinstance(note, str):
                self._send(400, {"error": "'note' must be a string"})
                return
            try:
                decision = service.decide(candidate_id, verdict, note)
            except KeyError:
                self._send(404, {"error": f"no queued candidate {candidate_id!r}"})
                return
            except ValueError as exc:
                self._send(400, {"error": str(exc)})
                return
            except AlreadyDecidedError as exc:
                self._send(
                    409,
                    {
                        "error": "candidate already decided",
                        "decision": exc.decision.as_dict(),
                    },
                )
                return
            self._send(200, {"candidate_id": candidate_id, "decision": decision})

    return Handler


def parse_addr(addr: str) -> tuple[str, int]:
    """Split "host:port"; raises ValueError on anything else."""
    host, sep, port_text = addr.rpartition(":")
    if not sep or not host:
        raise ValueError(f"address must look like host:port, got {addr!r}")
    return host, int(port_text)
