"""WebSocket session service: the live counterpart of the scripted runner.

One service hosts named sessions; each session owns a trained model, a
synthetic operator, the composer state, and an append-only event log with
the same schema the scripted runner writes — a live session's log replays
exactly like a scripted one.

Interactive contract: the client designates the attended key between
trials (``attend``), then asks for a trial (``function_key start_trial``).
The attended key parameterizes the synthetic epoch generator only — the
selection is always the outcome of the full score/recognize loop, never
the click itself.  Input that arrives during flashing is rejected with a
``mid_trial`` error and changes nothing.

Frames stream as one JSON document per WebSocket text message (the
transport's message framing carries the length; see wire.py for the raw
byte framing used on unframed pipes).
"""

from __future__ import annotations

import asyncio
import contextlib
import time
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .composer import CompositionState, KeyboardLayout, apply_key, parse_key_label
from .errors import InputError, ProtocolError, SpellerError
from .paradigm import (
    SelectionTrial,
    accumulate,
    flash_events,
    make_schedule,
    recognize,
    selection_duration_ms,
    sequence_span_ms,
)
from .session import EventLog, SessionConfig, _start, run_calibration
from .signals import decimate_epoch
from .subject import SyntheticSubject
from .suggestions import SuggestionEngine, make_provider
from .swlda import model_to_payload, score_rows
from .wire import PROTOCOL, error_frame, make_frame, parse_message

RESUME_TIMEOUT_S = 600.0
DEFAULT_SESSION = "main"


class LiveSession:
    """Mutable state of one operator's session; single-writer by contract."""

    def __init__(self, cfg: SessionConfig, name: str = DEFAULT_SESSION):
        self.cfg = cfg
        self.name = name
        self.layout = KeyboardLayout()
        self.log = EventLog(cfg.log_path)
        calibration = run_calibration(cfg, self.log)
        self.model = calibration.model
        _start(cfg, self.log, "interactive")
        self.log.emit("model", payload=model_to_payload(self.model))
        self.subject = SyntheticSubject(cfg.subject)
        self.schedule_rng = np.random.default_rng(cfg.seed + 2)
        self.engine = self._make_engine(cfg)
        self.state = CompositionState()
        self.attended = None
        self.in_trial = False
        self.paused = False
        self.speed = 1.0
        self.client_attached = False
        self.ever_attached = False
        self.detached_at: float | None = None
        if self.engine is not None:
            self._refresh_suggestions()

    @staticmethod
    def _make_engine(cfg: SessionConfig) -> SuggestionEngine | None:
        if cfg.letter_only:
            return None
        provider = make_provider(
            cfg.provider,
            remote_base_url=cfg.remote_base_url or "",
            remote_model=cfg.remote_model or "",
            target=cfg.target or "",
        )
        return SuggestionEngine(provider)

    def _refresh_suggestions(self) -> None:
        suggestion_set = self.engine.get(self.state.composed)
        self.state = self.state.with_slots(suggestion_set.slots)
        self.log.emit(
            "suggestions",
            slots=list(suggestion_set.slots),
            provenance=suggestion_set.provenance,
            queried_with=suggestion_set.queried_with,
        )

    def config_frame(self) -> dict:
        cfg = self.cfg
        return make_frame(
            "config",
            mode=cfg.mode,
            target=cfg.target.replace(" ", "-") if cfg.target else None,
            grid=[[key.label for key in row] for row in self.layout.grid],
            timing={
                "flash_ms": cfg.timing.flash_ms,
                "isi_ms": cfg.timing.isi_ms,
                "inter_sequence_ms": cfg.timing.inter_sequence_ms,
                "post_selection_ms": cfg.timing.post_selection_ms,
            },
            n_sequences=cfg.n_sequences,
            speed=self.speed,
        )

    def compose_frame(self, last_key: str | None = None) -> dict:
        return make_frame(
            "compose_state",
            composed=self.state.composed,
            display=self.state.display,
            finished=self.state.finished,
            last_key=last_key,
        )

    def suggestions_frame(self) -> dict:
        return make_frame("suggestions", slots=list(self.state.slots))


class SpellerService:
    """Session registry plus the per-connection frame loop."""

    def __init__(self, cfg: SessionConfig | None = None, resume_timeout_s: float = RESUME_TIMEOUT_S):
        self.cfg = cfg or SessionConfig(mode="interactive", target=None)
        self.resume_timeout_s = resume_timeout_s
        self.sessions: dict[str, LiveSession] = {}

    def get_or_create(self, name: str) -> tuple[LiveSession, bool]:
        self._prune()
        session = self.sessions.get(name)
        if session is None:
            # Only the default session writes cfg.log_path; extra named
            # sessions log in memory so files are never clobbered.
            cfg = self.cfg if name == DEFAULT_SESSION else replace(self.cfg, log_path=None)
            session = LiveSession(cfg, name)
            self.sessions[name] = session
        resumed = session.ever_attached
        return session, resumed

    def _prune(self) -> None:
        now = time.monotonic()
        for name in list(self.sessions):
            session = self.sessions[name]
            if (
                not session.client_attached
                and session.detached_at is not None
                and now - session.detached_at > self.resume_timeout_s
            ):
                session.log.close()
                del self.sessions[name]

    async def handle(self, ws: WebSocket) -> None:
        await ws.accept()
        try:
            hello = parse_message(await ws.receive_text())
        except WebSocketDisconnect:
            return
        except ProtocolError as exc:
            await ws.send_json(error_frame("bad_frame", str(exc)))
            await ws.send_json(make_frame("bye", reason="handshake failed"))
            await ws.close()
            return
        if hello.get("kind") != "hello":
            await ws.send_json(error_frame("protocol", "first frame must be hello"))
            await ws.send_json(make_frame("bye", reason="handshake failed"))
            await ws.close()
            return
        name = hello.get("session") or DEFAULT_SESSION
        session, resumed = self.get_or_create(name)
        if session.client_attached:
            await ws.send_json(error_frame("busy", f"session {name!r} already has a client"))
            await ws.send_json(make_frame("bye", reason="busy"))
            await ws.close()
            return
        session.client_attached = True
        session.ever_attached = True
        session.paused = False
        await ws.send_json(
            make_frame("hello", role="server", protocol=PROTOCOL, session=name, resumed=resumed)
        )
        await ws.send_json(session.config_frame())
        await ws.send_json(session.compose_frame())
        await ws.send_json(session.suggestions_frame())
        trial_task: asyncio.Task | None = None
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    frame = parse_message(raw)
                except ProtocolError as exc:
                    await ws.send_json(error_frame("bad_frame", str(exc)))
                    continue
                if trial_task is not None and trial_task.done():
                    exc = trial_task.exception()
                    if exc is not None:
                        await ws.send_json(error_frame("internal", str(exc)))
                    trial_task = None
                kind = frame["kind"]
                if kind == "bye":
                    await ws.send_json(make_frame("bye", reason="client request"))
                    break
                if kind == "hello":
                    await ws.send_json(error_frame("protocol", "already connected"))
                    continue
                if session.in_trial:
                    await ws.send_json(
                        error_frame("mid_trial", f"{kind} not accepted during flashing")
                    )
                    continue
                if kind == "attend":
                    await self._on_attend(session, ws, frame)
                elif kind == "function_key":
                    trial_task = await self._on_function(session, ws, frame, trial_task)
        except WebSocketDisconnect:
            pass
        finally:
            if trial_task is not None:
                trial_task.cancel()
                with contextlib.suppress(asyncio.CancelledError, Exception):
                    await trial_task
            session.client_attached = False
            session.detached_at = time.monotonic()
            session.paused = True

    async def _on_attend(self, session: LiveSession, ws: WebSocket, frame: dict) -> None:
        try:
            key = parse_key_label(frame["key"])
        except (InputError, SpellerError) as exc:
            await ws.send_json(error_frame("protocol", str(exc)))
            return
        session.attended = key
        await ws.send_json(make_frame("attend", key=key.label, accepted=True))

    async def _on_function(
        self,
        session: LiveSession,
        ws: WebSocket,
        frame: dict,
        trial_task: asyncio.Task | None,
    ) -> asyncio.Task | None:
        name = frame["name"]
        if name == "set_speed":
            session.speed = float(frame["value"])
            await ws.send_json(make_frame("function_key", name=name, value=session.speed, accepted=True))
            return trial_task
        if name == "pause":
            session.paused = True
            await ws.send_json(make_frame("function_key", name=name, accepted=True))
            return trial_task
        if name == "resume":
            session.paused = False
            await ws.send_json(make_frame("function_key", name=name, accepted=True))
            return trial_task
        # start_trial
        if session.paused:
            await ws.send_json(error_frame("protocol", "session is paused"))
            return trial_task
        if session.state.finished:
            await ws.send_json(error_frame("protocol", "composition already finished"))
            return trial_task
        if session.attended is None:
            await ws.send_json(error_frame("protocol", "attend a key before starting a trial"))
            return trial_task
        await ws.send_json(make_frame("function_key", name=name, accepted=True))
        session.in_trial = True
        return asyncio.create_task(self._run_trial(session, ws))

    async def _run_trial(self, session: LiveSession, ws: WebSocket) -> None:
        """One interactive selection; streams flashes, then the outcome."""
        cfg = session.cfg
        intended = session.attended
        try:
            schedule = make_schedule(session.schedule_rng, cfg.n_sequences, cfg.timing)
            trial = SelectionTrial(schedule)
            base = session.log.t_ms
            span = sequence_span_ms(cfg.timing)
            per_code = np.zeros(13)
            cursor = 0
            for ev in flash_events(schedule):
                await self._sleep(session, ev.on_ms - cursor)
                epoch = session.subject.epoch_for_flash(intended, ev.code)
                features = decimate_epoch(epoch)
                per_code[ev.code - 1] = score_rows(session.model, features[None, :])[0]
                session.log.t_ms = base + ev.on_ms
                entry = {"code": ev.code, "sequence": ev.sequence, "off_ms": base + ev.off_ms}
                if cfg.log_features:
                    entry["features"] = features.tolist()
                session.log.emit("flash", **entry)
                await ws.send_json(
                    make_frame("flash", code=ev.code, state="on", sequence=ev.sequence)
                )
                await self._sleep(session, ev.off_ms - ev.on_ms)
                await ws.send_json(
                    make_frame("flash", code=ev.code, state="off", sequence=ev.sequence)
                )
                cursor = ev.off_ms
                if ev.position == 12:
                    accumulate(trial, per_code)
                    session.log.t_ms = base + (ev.sequence + 1) * span
                    session.log.emit(
                        "score",
                        sequence=ev.sequence,
                        cumulative=[float(v) for v in trial.cumulative],
                    )
                    per_code = np.zeros(13)
            col_code, row_code = recognize(trial)
            recognized = session.layout.key_for_codes(col_code, row_code)
            session.log.t_ms = base + cfg.n_sequences * span
            correct = recognized == intended
            session.log.emit(
                "trial_result",
                recognized=recognized.label,
                intended=intended.label,
                correct=correct,
            )
            session.state = apply_key(session.state, recognized)
            session.log.emit(
                "compose", composed=session.state.composed, finished=session.state.finished
            )
            session.log.t_ms = base + selection_duration_ms(cfg.timing, cfg.n_sequences)
            session.attended = None
            await ws.send_json(
                make_frame(
                    "trial_result",
                    recognized=recognized.label,
                    intended=intended.label,
                    correct=correct,
                )
            )
            await ws.send_json(session.compose_frame(last_key=recognized.label))
            if session.engine is not None and not session.state.finished:
                session._refresh_suggestions()
                await ws.send_json(session.suggestions_frame())
            await self._sleep(session, cfg.timing.post_selection_ms)
        finally:
            session.in_trial = False

    async def _sleep(self, session: LiveSession, virtual_ms: int) -> None:
        if virtual_ms <= 0:
            return
        await asyncio.sleep(virtual_ms / 1000.0 / max(session.speed, 1e-9))


def create_app(
    cfg: SessionConfig | None = None,
    static_dir: str | None = None,
    resume_timeout_s: float = RESUME_TIMEOUT_S,
) -> FastAPI:
    """The ASGI app: /ws speaks the wire protocol, / serves the UI bundle."""
    service = SpellerService(cfg, resume_timeout_s=resume_timeout_s)
    app = FastAPI(title="speller service")
    app.state.service = service

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await service.handle(websocket)

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "protocol": PROTOCOL, "sessions": len(service.sessions)}

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:

        @app.get("/")
        async def index_placeholder():
            return JSONResponse(
                {"detail": "no UI bundle configured; connect a client to /ws"},
                status_code=404,
            )

    return app


def serve(
    cfg: SessionConfig | None = None,
    port: int = 8977,
    static_dir: str | None = None,
) -> None:
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(cfg, static_dir=static_dir), host="127.0.0.1", port=port)
