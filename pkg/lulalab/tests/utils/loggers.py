# Python stdlib
import logging
import os.path
import tempfile
from unittest import TestCase

# Internal
from ...utils import ImproperlyConfigured
from ...utils.loggers import DefaultLogger


class DefaultLoggerTestCase(TestCase):

    def test_logger_name_required(self):
        self.assertRaises(ImproperlyConfigured, DefaultLogger, logger_name=None, log_file='x.log')

    def test_log_file_required_without_handler(self):
        self.assertRaises(ImproperlyConfigured, DefaultLogger, logger_name='lulalab.tests.nohandler')

    def test_lazy_file_handler(self):
        with tempfile.TemporaryDirectory() as tmp:
            log_file = os.path.join(tmp, 'sub', 'test.log')
            logger = DefaultLogger(logger_name='lulalab.tests.lazy', log_file=log_file)

            self.assertFalse(os.path.exists(log_file))

            logger.info('%s => written [OK]' % ('<Test>',))
            for handler in logger.handlers:
                handler.flush()

            self.assertTrue(os.path.exists(log_file))
            with open(log_file) as f:
                self.assertIn('<Test> => written [OK]', f.read())

            for handler in list(logger.handlers):
                handler.close()
                logger.removeHandler(handler)

    def test_message_buffer(self):
        wrapped = logging.getLogger('lulalab.tests.buffer')
        wrapped.addHandler(logging.NullHandler())
        logger = DefaultLogger(logger_name='lulalab.tests.buffer')
        logger.append_msg('first')
        logger.append_msg('second')

        self.assertEqual(logger.log_messages(lvl=logging.WARNING, start='> '), '> first\nsecond')
        self.assertEqual(logger.messages, [])
