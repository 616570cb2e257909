# Third-party
import numpy as np
import pandas as pd
from lxml import etree  # http://lxml.de/

# Internal
from .base import BaseCommand, prepare_data, load_model, resolve_posterior, evaluation_outliers, write_frame
from .. import laplace, lula, metrics
from ..log import default_logger as logger
from ..utils import ensure_path, stem_path
from ..utils.xmlhelper import XMLHelper


def evaluate(net, post, test, outliers, cfg, include_aleatoric=True):
    """Metrics of the predictive of post on the test set and every outlier set.

    Classification reports confidences (maximum class probabilities); regression
    reports predictive standard deviations, and the AUR then ranks inliers by -std.
    """
    loss = post.loss
    report = metrics.EvalReport()
    if loss.is_classification:
        probabilities = laplace.predict(net, post, test.features, cfg)
        in_conf = metrics.confidences(probabilities)
        report.add(metrics.DatasetMetrics(
            test.name, 'in',
            mmc=metrics.mmc(probabilities),
            brier=metrics.brier(probabilities, test.targets),
            accuracy=metrics.accuracy(probabilities, test.targets),
            log_likelihood=metrics.classification_log_likelihood(probabilities, test.targets),
            confidences=in_conf,
        ))
        for outlier in outliers:
            out_probabilities = laplace.predict(net, post, outlier.features, cfg)
            out_conf = metrics.confidences(out_probabilities)
            report.add(metrics.DatasetMetrics(
                outlier.name, 'out',
                mmc=metrics.mmc(out_probabilities),
                aur=metrics.auroc(in_conf, out_conf),
                confidences=out_conf,
            ))
        return report

    prediction = laplace.predict(net, post, test.features, cfg)
    in_std = np.sqrt(prediction.variance(include_aleatoric)).mean(axis=1)
    report.add(metrics.DatasetMetrics(
        test.name, 'in',
        mean_std=metrics.mean_predictive_std(prediction.variance(include_aleatoric)),
        log_likelihood=metrics.gaussian_log_likelihood(prediction.mean, prediction.total_variance, test.targets),
        rmse=metrics.rmse(prediction.mean, test.targets),
        confidences=in_std,
    ))
    for outlier in outliers:
        out_prediction = laplace.predict(net, post, outlier.features, cfg)
        out_std = np.sqrt(out_prediction.variance(include_aleatoric)).mean(axis=1)
        report.add(metrics.DatasetMetrics(
            outlier.name, 'out',
            mean_std=metrics.mean_predictive_std(out_prediction.variance(include_aleatoric)),
            aur=metrics.auroc(-in_std, -out_std),
            confidences=out_std,
        ))
    return report


def summary_element(summary, **attrib):
    """XML form of a summarize_reports frame; metrics that are not defined for a dataset are left out."""
    root = etree.Element('evaluation', dict((k, str(v)) for k, v in attrib.items()))
    names = [c[:-len('_mean')] for c in summary.columns if c.endswith('_mean')]
    for row in summary.itertuples(index=False):
        row = row._asdict()
        elem = XMLHelper.sub(root, 'dataset', name=row['dataset'], role=row['role'])
        for name in names:
            mean, std = row[name + '_mean'], row[name + '_std']
            if np.isnan(mean):
                continue
            XMLHelper.sub(elem, 'metric', name=name, mean='%.17g' % mean, std='%.17g' % std)
    return root


def confidence_frame(reports):
    """The raw confidences of every run, with the run index as first column."""
    frames = [report.confidence_frame() for report in reports]
    for run, frame in enumerate(frames):
        frame.insert(0, 'run', run)
    return pd.concat(frames, ignore_index=True)


def evaluation_posterior(config, net, aug, splits, loss):
    """The configured posterior of net; an augmented network reuses the prior precision of its MAP network."""
    if aug is None:
        return resolve_posterior(config, net, splits, loss)[0]
    map_post, _ = resolve_posterior(config, lula.strip(net, aug), splits, loss)
    section = config['laplace']
    curvature = laplace.fit_curvature(net, splits.train, loss, section['curvature'], section['subset'])
    return laplace.build_posterior(curvature, laplace.subset_mean(net, section['subset']), map_post.prior_precision, section['damping'])


class Command(BaseCommand):
    """Evaluates the Laplace predictive of a model on the test set and synthetic outliers."""
    help = 'Evaluate a model; writes <model>.eval.csv (or --out), the confidences CSV of every run and a summary XML.'
    requires_model = True

    def handle(self, config, options):
        net, aug = load_model(options.model)
        splits = prepare_data(config)
        loss = config.loss_kind()
        post = evaluation_posterior(config, net, aug, splits, loss)
        outliers = evaluation_outliers(config, splits.test)

        section = config['eval']
        reports = [evaluate(net, post, splits.test, outliers, config.predict_config(run), section['include_aleatoric']) for run in range(section['runs'])]
        summary = metrics.summarize_reports(reports)

        out = options.out or stem_path(options.model, '.eval.csv')
        ensure_path(out)
        write_frame(summary, out)
        write_frame(confidence_frame(reports), stem_path(out, '.confidences.csv'))
        XMLHelper.write(summary_element(summary, model=options.model, runs=section['runs'], method=section['method'], prior_precision='%.17g' % post.prior_precision), stem_path(out, '.summary.xml'))

        logger.info('%s - eval command => %s runs, %s outlier sets, written to %s [OK]' % (net.log_desc, section['runs'], len(outliers), out))
        self.stdout.write('Evaluation over %s runs written to %s.\n' % (section['runs'], out))
