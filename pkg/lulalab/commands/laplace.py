# Third-party
from lxml import etree  # http://lxml.de/

# Internal
from .base import BaseCommand, prepare_data, load_model, resolve_posterior
from .. import laplace
from ..log import default_logger as logger
from ..utils import ensure_path, stem_path
from ..utils.xmlhelper import XMLHelper


def posterior_element(post, tuning, model_path, val_log_likelihood):
    """Metadata of a fitted posterior: kind, chosen prior precision and the tuning scores."""
    root = etree.Element(
        'laplace_posterior',
        model=str(model_path),
        curvature=post.kind,
        subset=post.subset,
        damping=post.damping,
        parameters=str(post.size),
        n_data=str(post.curvature.n_data),
    )
    XMLHelper.sub(root, 'prior_precision', '%.17g' % post.prior_precision)
    XMLHelper.sub(root, 'val_log_likelihood', '%.17g' % val_log_likelihood)
    if tuning is not None:
        candidates = XMLHelper.sub(root, 'tuning', objective=tuning.objective)
        for lam, score in tuning.scores:
            XMLHelper.sub(candidates, 'candidate', prior_precision='%.17g' % lam, score='failed' if score is None else '%.17g' % score)
    return root


class Command(BaseCommand):
    """Fits the Laplace posterior of a trained model and writes its metadata."""
    help = 'Fit the Laplace posterior; writes <model>.laplace.xml (or --out).'
    requires_model = True

    def handle(self, config, options):
        net, _ = load_model(options.model)
        splits = prepare_data(config)
        loss = config.loss_kind()
        post, tuning = resolve_posterior(config, net, splits, loss)
        prediction = laplace.predict(net, post, splits.val.features, config.tuning_predict_config())
        val_log_likelihood = laplace.validation_log_likelihood(prediction, splits.val, loss)

        out = options.out or stem_path(options.model, '.laplace.xml')
        ensure_path(out)
        XMLHelper.write(posterior_element(post, tuning, options.model, val_log_likelihood), out)

        logger.info('%s - laplace command => %r written to %s [OK]' % (net.log_desc, post, out))
        self.stdout.write('Posterior %s/%s, prior precision %g, validation log-likelihood %.6g; metadata written to %s.\n' % (post.kind, post.subset, post.prior_precision, val_log_likelihood, out))
