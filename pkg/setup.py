"""
Packaging of lula-lab; packages are found by walking the package tree.
"""
from setuptools import setup
import os


def fullsplit(path, result=None):
    """
    Split a pathname into components (the opposite of os.path.join) in a
    platform-neutral way.
    """
    if result is None:
        result = []
    head, tail = os.path.split(path)
    if head == '':
        return [tail] + result
    if head == path:
        return result
    return fullsplit(head, [tail] + result)


# Compile the list of packages available.
packages = []
root_dir = os.path.dirname(__file__)
if root_dir != '':
    os.chdir(root_dir)
lulalab_dir = 'lulalab'

for dirpath, dirnames, filenames in os.walk(lulalab_dir):
    # Ignore dirnames that start with '.'
    dirnames[:] = [d for d in dirnames if not d.startswith('.')]
    if '__init__.py' in filenames:
        packages.append('.'.join(fullsplit(dirpath)))

# Dynamically calculate the version based on lulalab.VERSION.
version = __import__('lulalab').get_version()

with open('requirements.txt') as f:
    install_requires = [line.split('#')[0].strip() for line in f if line.split('#')[0].strip()]

setup(
    name='lula-lab',
    version=version,
    description='Laplace-approximated neural networks with LULA units for post-hoc uncertainty tuning.',
    packages=packages,
    install_requires=install_requires,
    python_requires='>=3.8',
    entry_points={
        'console_scripts': ['lula-lab = lulalab.cli:main'],
    },
    test_suite='lulalab.tests',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
)
