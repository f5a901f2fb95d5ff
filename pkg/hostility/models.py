from django.db import models
from django.core.validators import MinValueValidator, MaxValueValidator


class ScenarioRun(models.Model):
    """
    One execution of the detection engine over a frame sequence.
    """
    name = models.CharField(max_length=255, help_text="Scenario directory or frames file the run consumed")
    seed = models.BigIntegerField(null=True, blank=True, help_text="Effective seed, if any")
    theta = models.FloatField(
        validators=[MinValueValidator(0.0), MaxValueValidator(1.0)],
        help_text="Alert threshold used for the run"
    )
    frames_processed = models.IntegerField(default=0)
    alert_count = models.IntegerField(default=0, help_text="Distinct objects flagged by the network")
    miss_count = models.IntegerField(default=0)
    model_path = models.CharField(max_length=500, blank=True, default="")
    report_path = models.CharField(max_length=500, blank=True, default="")
    config = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at', 'name']
        verbose_name = "Scenario Run"
        verbose_name_plural = "Scenario Runs"

    def __str__(self):
        return f"{self.name} ({self.alert_count} alerts, {self.miss_count} misses)"


class DetectionAlert(models.Model):
    """
    An object highlighted by one of the scorers.
    """
    SOURCE_CHOICES = [
        ('neural', 'Neural'),
        ('analytic', 'Analytic'),
        ('template', 'Template'),
    ]

    run = models.ForeignKey(ScenarioRun, on_delete=models.CASCADE, related_name='alerts')
    object_id = models.IntegerField(help_text="Tagged object id")
    timestamp = models.FloatField(help_text="Frame time of the alert (s)")
    probability = models.FloatField(validators=[MinValueValidator(0.0), MaxValueValidator(1.0)])
    source = models.CharField(max_length=20, choices=SOURCE_CHOICES, default='neural')

    class Meta:
        ordering = ['run', 'timestamp', 'object_id']

    def __str__(self):
        return f"{self.get_source_display()} alert on object {self.object_id:03d} at t={self.timestamp}"


class DetectionMiss(models.Model):
    """
    A hostile act the network did not flag in advance.
    """
    run = models.ForeignKey(ScenarioRun, on_delete=models.CASCADE, related_name='misses')
    object_id = models.IntegerField()
    act_time = models.FloatField()
    first_alert_time = models.FloatField(null=True, blank=True, help_text="First neural alert after retraining, if any")

    class Meta:
        ordering = ['run', 'act_time']
        verbose_name_plural = "Detection misses"

    def __str__(self):
        return f"Miss on object {self.object_id:03d} at t={self.act_time}"
