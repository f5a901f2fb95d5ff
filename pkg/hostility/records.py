"""
Run history persistence.
"""

import logging
from typing import Mapping, Optional

from django.db import transaction

from .models import DetectionAlert, DetectionMiss, ScenarioRun

logger = logging.getLogger(__name__)


@transaction.atomic
def record_run(name: str, report: Mapping, model_path: str = "", report_path: str = "",
               seed: Optional[int] = None) -> ScenarioRun:
    """Store a serialized RunReport with its alerts and misses."""
    config = dict(report.get("config", {}))
    run = ScenarioRun.objects.create(
        name=name,
        seed=seed if seed is not None else report.get("seed"),
        theta=config.get("theta", 0.0),
        frames_processed=report.get("frames_processed", 0),
        alert_count=report.get("alert_count", 0),
        miss_count=len(report.get("misses", [])),
        model_path=str(model_path),
        report_path=str(report_path),
        config=config,
    )
    DetectionAlert.objects.bulk_create([
        DetectionAlert(run=run, object_id=a["object_id"], timestamp=a["t"],
                       probability=a["p"], source=a["source"])
        for a in report.get("alerts", [])
    ])
    DetectionMiss.objects.bulk_create([
        DetectionMiss(run=run, object_id=m["object_id"], act_time=m["act_time"],
                      first_alert_time=m.get("first_alert_time"))
        for m in report.get("misses", [])
    ])
    logger.info(f"Recorded run {run.pk} for {name}: {run.alert_count} alerts, {run.miss_count} misses")
    return run
