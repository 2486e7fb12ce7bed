#!/usr/bin/env python

# setup script for kmfv

from setuptools import setup
from codecs import open
from os import path

here = path.abspath(path.dirname(__file__))

# get long description from README
with open(path.join(here, 'README.rst'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name='kmfv',
    version='0.1-dev',  # change this in kmfv/__init__.py also
    description='A motion-free B-frame neural video codec',
    long_description=long_description,
    license='New BSD License',
    classifiers=[
        'Intended Audience :: Science/Research',
        'Intended Audience :: Developers',
        'License :: OSI Approved :: BSD License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering',
        'Topic :: Multimedia :: Video',
        'Operating System :: MacOS :: MacOS X',
        'Operating System :: Microsoft :: Windows',
        'Operating System :: POSIX :: Linux'],
    python_requires='>=3.8',
    install_requires=['numpy', 'scipy', 'torch', 'compressai', 'Pillow',
                      'matplotlib'],
    extras_require={'tests': ['pytest']},
    packages=[
        'kmfv',
        'kmfv.analysis',
        'kmfv.analysis.tests',
        'kmfv.fileio',
        'kmfv.fileio.tests',
        'kmfv.process',
        'kmfv.process.tests',
        'kmfv.util',
        'kmfv.util.tests'],
    entry_points={'console_scripts': ['kmfv=kmfv.cli:main']},
    include_package_data=True,
)
