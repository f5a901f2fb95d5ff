# Generated by Django 5.1.4

import django.core.validators
import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ScenarioRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(help_text='Scenario directory or frames file the run consumed', max_length=255)),
                ('seed', models.BigIntegerField(blank=True, help_text='Effective seed, if any', null=True)),
                ('theta', models.FloatField(help_text='Alert threshold used for the run', validators=[django.core.validators.MinValueValidator(0.0), django.core.validators.MaxValueValidator(1.0)])),
                ('frames_processed', models.IntegerField(default=0)),
                ('alert_count', models.IntegerField(default=0, help_text='Distinct objects flagged by the network')),
                ('miss_count', models.IntegerField(default=0)),
                ('model_path', models.CharField(blank=True, default='', max_length=500)),
                ('report_path', models.CharField(blank=True, default='', max_length=500)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'verbose_name': 'Scenario Run',
                'verbose_name_plural': 'Scenario Runs',
                'ordering': ['-created_at', 'name'],
            },
        ),
        migrations.CreateModel(
            name='DetectionAlert',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('object_id', models.IntegerField(help_text='Tagged object id')),
                ('timestamp', models.FloatField(help_text='Frame time of the alert (s)')),
                ('probability', models.FloatField(validators=[django.core.validators.MinValueValidator(0.0), django.core.validators.MaxValueValidator(1.0)])),
                ('source', models.CharField(choices=[('neural', 'Neural'), ('analytic', 'Analytic'), ('template', 'Template')], default='neural', max_length=20)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='alerts', to='hostility.scenariorun')),
            ],
            options={
                'ordering': ['run', 'timestamp', 'object_id'],
            },
        ),
        migrations.CreateModel(
            name='DetectionMiss',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('object_id', models.IntegerField()),
                ('act_time', models.FloatField()),
                ('first_alert_time', models.FloatField(blank=True, help_text='First neural alert after retraining, if any', null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='misses', to='hostility.scenariorun')),
            ],
            options={
                'verbose_name_plural': 'Detection misses',
                'ordering': ['run', 'act_time'],
            },
        ),
    ]
