"""HTTP server for the human rating loop.

Serves the next unrated item per (rater, task), accepts ratings into the
append-only store, and exposes live bucket/agreement statistics with the
current recommended threshold.  The browser UI is a static bundle mounted
at the root; it talks only to these endpoints.
"""

from __future__ import annotations

import math
import time
from pathlib import Path
from typing import Optional, Sequence

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from .calibration import (
    LIKERT_RUBRICS,
    LIKERT_TASKS,
    BucketRelevanceStat,
    PairScore,
    RatingRecord,
    RatingStore,
    RatingTask,
    SampleSet,
    ThresholdRecommendation,
    bucket_relevance,
    chance_corrected_agreement,
    percent_agreement,
    recommend_threshold,
    unrated_items,
)
from .core import ImageRecord
from .errors import NoDataError


class ReviewServer:
    """State behind the review API: sample, pair queue, rating store."""

    def __init__(
        self,
        records: Sequence[ImageRecord],
        sample: SampleSet,
        store: RatingStore,
        pairs: Sequence[PairScore] = (),
        target_relevance_pct: float = 85.0,
        likert_items: Optional[Sequence[str]] = None,
    ):
        self.records = {r.id: r for r in records}
        self.sample = sample
        self.store = store
        self.pairs = list(pairs)
        self.target_relevance_pct = target_relevance_pct
        if likert_items is None:
            likert_items = [
                item
                for item in sample.all_items()
                if self.records.get(item) is not None
                and self.records[item].caption_en
            ]
        self.likert_items = list(likert_items)

    def queue_for(self, task: RatingTask) -> list[str]:
        if task is RatingTask.BUCKET_RELEVANCE:
            return self.sample.all_items()
        if task is RatingTask.DEDUP_PAIR:
            return [p.item_id for p in self.pairs]
        return list(self.likert_items)

    def next_item(self, rater_id: str, task: RatingTask) -> Optional[str]:
        done = self.store.rated_items(rater_id, task)
        for item in self.queue_for(task):
            if item not in done:
                return item
        return None

    def task_payload(self, item_id: str, task: RatingTask) -> dict:
        payload: dict = {"item_id": item_id, "task": task.value}
        if task is RatingTask.DEDUP_PAIR:
            id_a, _, id_b = item_id.partition("|")
            payload["image_urls"] = [f"/img/{id_a}", f"/img/{id_b}"]
            return payload
        payload["image_url"] = f"/img/{item_id}"
        record = self.records.get(item_id)
        if record is not None and record.caption_en:
            payload["caption"] = record.caption_en
        if task is RatingTask.BUCKET_RELEVANCE:
            payload["bucket"] = self.sample.bucket_of(item_id)
        if task in LIKERT_TASKS:
            payload["rubric"] = {
                str(score): text
                for score, text in sorted(
                    LIKERT_RUBRICS[task.value].items(), reverse=True
                )
            }
        return payload

    def bucket_stats(self) -> tuple[list[BucketRelevanceStat], ThresholdRecommendation]:
        stats = bucket_relevance(self.store.ratings, self.sample)
        recommendation = recommend_threshold(stats, self.target_relevance_pct)
        return stats, recommendation


def _stat_to_obj(stat: BucketRelevanceStat) -> dict:
    # JSON has no Infinity; unbounded interval ends are sent as null.
    return {
        "bucket": stat.bucket.label.value,
        "lower": stat.bucket.lower if math.isfinite(stat.bucket.lower) else None,
        "upper": stat.bucket.upper if math.isfinite(stat.bucket.upper) else None,
        "n_items": stat.n_items,
        "relevance_pct": stat.relevance_pct,
        "agreement": stat.agreement,
    }


def create_app(server: ReviewServer, static_dir=None) -> FastAPI:
    app = FastAPI(title="curator review")

    @app.get("/api/tasks/next")
    def tasks_next(rater: str, task: str):
        try:
            kind = RatingTask(task)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"unknown task {task!r}")
        item = server.next_item(rater, kind)
        if item is None:
            return {"item": None, "done": True}
        return {"item": server.task_payload(item, kind), "done": False}

    @app.post("/api/ratings", status_code=201)
    def post_rating(payload: dict = Body(...)):
        try:
            rating = RatingRecord(
                rater_id=payload["rater_id"],
                item_id=payload["item_id"],
                task=RatingTask(payload["task"]),
                value=payload["value"],
                timestamp=time.time(),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        known = set(server.queue_for(rating.task))
        if rating.item_id not in known:
            raise HTTPException(
                status_code=422, detail=f"unknown item {rating.item_id!r}"
            )
        if rating.item_id in server.store.rated_items(rating.rater_id, rating.task):
            raise HTTPException(
                status_code=409,
                detail=f"{rating.rater_id} already rated {rating.item_id}",
            )
        server.store.append(rating)
        return {"accepted": True, "total_ratings": len(server.store)}

    @app.get("/api/stats/buckets")
    def stats_buckets():
        try:
            stats, recommendation = server.bucket_stats()
        except NoDataError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {
            "stats": [_stat_to_obj(s) for s in stats],
            "recommended": {
                "boundary": recommendation.boundary,
                "rho": recommendation.rho,
                "buckets": list(recommendation.buckets),
                "warning": recommendation.warning,
            },
            "target_relevance_pct": server.target_relevance_pct,
            "unrated": unrated_items(server.store.ratings, server.sample),
        }

    @app.get("/api/stats/agreement")
    def stats_agreement():
        ratings = server.store.ratings
        per_task = {}
        for kind in RatingTask:
            task_ratings = [r for r in ratings if r.task is kind]
            if task_ratings:
                per_task[kind.value] = percent_agreement(task_ratings)
        return {
            "percent_agreement": percent_agreement(ratings),
            "chance_corrected": chance_corrected_agreement(ratings),
            "per_task": per_task,
            "n_ratings": len(ratings),
        }

    @app.get("/img/{item_id}")
    def serve_image(item_id: str):
        record = server.records.get(item_id)
        if record is None or not record.local_path:
            raise HTTPException(status_code=404, detail=f"no image for {item_id!r}")
        path = Path(record.local_path)
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"missing file for {item_id!r}")
        return FileResponse(path)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8080) -> None:
    """Run the review server until interrupted."""
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
